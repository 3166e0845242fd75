#include "henonlab/observables.hpp"

#include <cmath>
#include <sstream>

#include "henonlab/parallel.hpp"
#include "henonlab/rng.hpp"

namespace henon {

bool PshRegion::contains(const Point2C& q) const {
  switch (kind) {
    case Kind::none: return false;
    case Kind::everywhere: return true;
    case Kind::box: {
      const auto x = q.real4();
      for (int a = 0; a < 4; ++a)
        if (std::abs(x[a]) > radii[a]) return false;
      return true;
    }
    case Kind::sublevel: return g && (*g)(q) < level;
  }
  return false;
}

Bounds Observable::bounds_on(const std::array<double, 4>& radii) const {
  if (box_bounds) return box_bounds(radii);
  return {lower, upper};
}

namespace {
double corner_norm(const std::array<double, 4>& r) {
  return std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + r[3] * r[3]);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace

Observable make_log_distance(const Point2C& a) {
  Observable o;
  o.eval = [a](const Point2C& q) { return std::log((q - a).norm()); };
  o.psh.kind = PshRegion::Kind::everywhere;
  o.label = "log_dist:" + fmt(a.z1.real()) + "," + fmt(a.z1.imag()) + "," + fmt(a.z2.real()) + "," + fmt(a.z2.imag());
  o.singular = {a};
  o.box_bounds = [a](const std::array<double, 4>& r) {
    const auto x = a.real4();
    double out2 = 0.0;
    for (int k = 0; k < 4; ++k) {
      const double d = std::max(std::abs(x[k]) - r[k], 0.0);
      out2 += d * d;
    }
    return Bounds{out2 > 0 ? 0.5 * std::log(out2) : -INFINITY, std::log(a.norm() + corner_norm(r))};
  };
  return o;
}

Observable make_coord_sq() {
  Observable o;
  o.eval = [](const Point2C& q) { return std::norm(q.z1) + std::norm(q.z2); };
  o.psh.kind = PshRegion::Kind::everywhere;
  o.lower = 0.0;
  o.label = "coord_sq";
  o.box_bounds = [](const std::array<double, 4>& r) {
    const double c = corner_norm(r);
    return Bounds{0.0, c * c};
  };
  return o;
}

Observable make_re_z1() {
  Observable o;
  o.eval = [](const Point2C& q) { return q.z1.real(); };
  o.psh.kind = PshRegion::Kind::everywhere;
  o.label = "re_z1";
  o.box_bounds = [](const std::array<double, 4>& r) { return Bounds{-r[0], r[0]}; };
  return o;
}

Observable make_constant(double c) {
  Observable o;
  o.eval = [c](const Point2C&) { return c; };
  o.psh.kind = PshRegion::Kind::everywhere;
  o.lower = o.upper = c;
  o.label = "const:" + fmt(c);
  return o;
}

Observable truncate(const Observable& obs, double M) {
  if (!(M > 0.0)) throw ConfigError("truncate: M must be positive");
  Observable o;
  auto inner = obs.eval;
  o.eval = [inner, M](const Point2C& q) {
    const double v = inner(q);
    return v >= -M ? v : -M;  // also maps -inf and NaN-free singular values to -M
  };
  o.psh = obs.psh;
  o.lower = std::max(obs.lower, -M);
  o.upper = std::max(obs.upper, -M);
  o.label = "trunc:" + fmt(M) + ":" + obs.label;
  auto b = obs;
  o.box_bounds = [b, M](const std::array<double, 4>& r) {
    const Bounds in = b.bounds_on(r);
    return Bounds{std::max(in.lo, -M), std::max(in.hi, -M)};
  };
  return o;
}

Observable scale(const Observable& obs, double a) {
  Observable o;
  auto inner = obs.eval;
  o.eval = [inner, a](const Point2C& q) { return a * inner(q); };
  o.psh = a >= 0 ? obs.psh : PshRegion{};
  o.lower = a >= 0 ? a * obs.lower : a * obs.upper;
  o.upper = a >= 0 ? a * obs.upper : a * obs.lower;
  if (a == 0) o.lower = o.upper = 0;
  o.label = "scale:" + fmt(a) + ":" + obs.label;
  o.singular = obs.singular;
  auto b = obs;
  o.box_bounds = [b, a](const std::array<double, 4>& r) {
    const Bounds in = b.bounds_on(r);
    if (a == 0) return Bounds{0.0, 0.0};
    return a > 0 ? Bounds{a * in.lo, a * in.hi} : Bounds{a * in.hi, a * in.lo};
  };
  return o;
}

double cutoff(double g, double k2, double k3) {
  if (g <= k2) return 1.0;
  if (g >= k3) return 0.0;
  const double t = (g - k2) / (k3 - k2);
  return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

std::pair<double, double> cutoff_derivative_bounds(double k2, double k3) {
  const double w = k3 - k2;
  return {1.875 / w, 10.0 / std::sqrt(3.0) / (w * w)};
}

double ExtensionInfo::ratio_bound() const {
  const double sup_obs = std::max(std::abs(sup - shift), std::abs(shift));
  const double sup_tau = sup * (kappa3 - kappa1) / (kappa2 - kappa1);
  return sup_obs > 0 ? 1.0 + sup_tau / sup_obs : INFINITY;
}

Observable extend(const Observable& obs, const ExtensionContext& ctx, ExtensionInfo* info) {
  const auto& t = ctx.kappas;
  if (!ctx.g_lambda) throw ConfigError("extend: missing G_lambda");
  if (!(t.kappa1 < t.kappa2 && t.kappa2 < t.kappa_cut)) throw ConfigError("extend: kappa ordering violated");
  const Bounds b = obs.bounds_on(ctx.box.radii);
  if (!std::isfinite(b.lo) || !std::isfinite(b.hi)) throw ConfigError("extend: observable unbounded on the region");

  ExtensionInfo e;
  e.shift = std::max(0.0, -b.lo);
  e.sup = b.hi + e.shift;
  e.kappa1 = t.kappa1;
  e.kappa2 = t.kappa2;
  e.kappa3 = t.kappa_cut;
  std::tie(e.chi_d1, e.chi_d2) = cutoff_derivative_bounds(t.kappa2, t.kappa_cut);
  if (info) *info = e;

  Observable o;
  auto inner = obs.eval;
  auto g = ctx.g_lambda;
  const GridGeometry box = ctx.box;
  o.eval = [inner, g, box, e](const Point2C& q) {
    if (!box.contains(q)) return 0.0;
    const double gl = (*g)(q);
    const double chi = cutoff(gl, e.kappa2, e.kappa3);
    if (chi == 0.0) return 0.0;
    const double tau = e.sup * (gl - e.kappa1) / (e.kappa2 - e.kappa1);
    const double phi = inner(q);
    if (chi == 1.0 && tau <= phi + e.shift) return phi;
    return chi * (std::max(phi + e.shift, tau) - e.shift);
  };
  o.psh.kind = PshRegion::Kind::sublevel;
  o.psh.level = t.kappa2;
  o.psh.g = g;
  o.lower = std::min(0.0, b.lo);
  o.upper = e.sup * (e.kappa3 - e.kappa1) / (e.kappa2 - e.kappa1);
  o.label = "ext:" + obs.label;
  const double lo = o.lower, hi = o.upper;
  o.box_bounds = [lo, hi](const std::array<double, 4>&) { return Bounds{lo, hi}; };
  return o;
}

double SampleRegion::diameter() const {
  double s = 0.0;
  for (double r : radii) s += 4.0 * r * r;
  return std::sqrt(s);
}

std::vector<cplx> levi_matrix(const std::function<double(const std::vector<double>&)>& u, const std::vector<double>& x,
                              double h) {
  const int dim = static_cast<int>(x.size());
  if (dim % 2 != 0 || dim == 0) throw ConfigError("levi_matrix: need an even number of real coordinates");
  const int n = dim / 2;
  std::vector<double> D(dim * dim);
  std::vector<double> y = x;
  const double c = u(x);
  auto at = [&](int a, double sa, int b, double sb) {
    y = x;
    y[a] += sa * h;
    if (b >= 0) y[b] += sb * h;
    return u(y);
  };
  for (int a = 0; a < dim; ++a) {
    D[a * dim + a] = (at(a, 1, -1, 0) - 2.0 * c + at(a, -1, -1, 0)) / (h * h);
    for (int b = a + 1; b < dim; ++b) {
      const double v = (at(a, 1, b, 1) - at(a, 1, b, -1) - at(a, -1, b, 1) + at(a, -1, b, -1)) / (4.0 * h * h);
      D[a * dim + b] = D[b * dim + a] = v;
    }
  }
  std::vector<cplx> H(n * n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const int xj = 2 * j, yj = 2 * j + 1, xk = 2 * k, yk = 2 * k + 1;
      H[j * n + k] = 0.25 * cplx(D[xj * dim + xk] + D[yj * dim + yk], D[xj * dim + yk] - D[yj * dim + xk]);
    }
  return H;
}

namespace {

// Cyclic Jacobi on the real embedding [[A, -B], [B, A]] of M = A + iB; each
// eigenvalue of M appears twice and (x; y) maps to the eigenvector x + iy.
HermitianEigen jacobi_eigen(const std::vector<cplx>& m, int n) {
  const int N = 2 * n;
  std::vector<double> S(N * N), V(N * N, 0.0);
  for (int i = 0; i < N; ++i) V[i * N + i] = 1.0;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const double A = 0.5 * (m[j * n + k].real() + m[k * n + j].real());
      const double B = 0.5 * (m[j * n + k].imag() - m[k * n + j].imag());
      S[j * N + k] = S[(j + n) * N + (k + n)] = A;
      S[(j + n) * N + k] = B;
      S[j * N + (k + n)] = -B;
    }
  double norm = 0.0;
  for (double v : S) norm += v * v;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < N; ++p)
      for (int q = p + 1; q < N; ++q) off += S[p * N + q] * S[p * N + q];
    if (off <= 1e-30 * norm || off == 0.0) break;
    for (int p = 0; p < N; ++p)
      for (int q = p + 1; q < N; ++q) {
        const double apq = S[p * N + q];
        if (apq == 0.0) continue;
        const double theta = (S[q * N + q] - S[p * N + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < N; ++k) {
          const double skp = S[k * N + p], skq = S[k * N + q];
          S[k * N + p] = c * skp - s * skq;
          S[k * N + q] = s * skp + c * skq;
          const double vkp = V[k * N + p], vkq = V[k * N + q];
          V[k * N + p] = c * vkp - s * vkq;
          V[k * N + q] = s * vkp + c * vkq;
        }
        for (int k = 0; k < N; ++k) {
          const double spk = S[p * N + k], sqk = S[q * N + k];
          S[p * N + k] = c * spk - s * sqk;
          S[q * N + k] = s * spk + c * sqk;
        }
      }
  }
  std::vector<int> order(N);
  for (int i = 0; i < N; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return S[a * N + a] < S[b * N + b]; });
  HermitianEigen out;
  for (int i = 0; i < N; i += 2) {
    out.values.push_back(0.5 * (S[order[i] * N + order[i]] + S[order[i + 1] * N + order[i + 1]]));
    std::vector<cplx> v(n);
    double nn = 0.0;
    for (int j = 0; j < n; ++j) {
      v[j] = {V[j * N + order[i]], V[(j + n) * N + order[i]]};
      nn += std::norm(v[j]);
    }
    for (auto& z : v) z /= std::sqrt(nn);
    out.vectors.push_back(std::move(v));
  }
  return out;
}

HermitianEigen closed_form_2x2(const std::vector<cplx>& m) {
  const double a = m[0].real(), d = m[3].real();
  const cplx b = 0.5 * (m[1] + std::conj(m[2]));
  const double mid = 0.5 * (a + d), r = std::hypot(0.5 * (a - d), std::abs(b));
  HermitianEigen out;
  out.values = {mid - r, mid + r};
  for (double l : out.values) {
    std::vector<cplx> v1{b, l - a}, v2{l - d, std::conj(b)};
    const double n1 = std::norm(v1[0]) + std::norm(v1[1]), n2 = std::norm(v2[0]) + std::norm(v2[1]);
    std::vector<cplx> v = n1 >= n2 ? v1 : v2;
    double nn = std::max(n1, n2);
    if (nn == 0.0) {
      v = out.vectors.empty() ? std::vector<cplx>{1.0, 0.0} : std::vector<cplx>{0.0, 1.0};
      nn = 1.0;
    }
    for (auto& z : v) z /= std::sqrt(nn);
    out.vectors.push_back(std::move(v));
  }
  return out;
}

}  // namespace

HermitianEigen hermitian_eigen(const std::vector<cplx>& m, int n) {
  if (n < 1 || static_cast<int>(m.size()) != n * n) throw ConfigError("hermitian_eigen: size mismatch");
  if (n == 1) return {{m[0].real()}, {{cplx(1.0)}}};
  if (n == 2) return closed_form_2x2(m);
  return jacobi_eigen(m, n);
}

std::vector<double> hermitian_eigenvalues(const std::vector<cplx>& m, int n) { return hermitian_eigen(m, n).values; }

double min_hermitian_eigenvalue(const std::vector<cplx>& m, int n) { return hermitian_eigenvalues(m, n).front(); }

double directional_levi(const std::function<double(const std::vector<double>&)>& u, const std::vector<double>& x,
                        const std::vector<cplx>& v, double h) {
  const std::size_t n = v.size();
  std::vector<double> r(2 * n), ir(2 * n);
  for (std::size_t j = 0; j < n; ++j) {
    r[2 * j] = v[j].real();
    r[2 * j + 1] = v[j].imag();
    ir[2 * j] = -v[j].imag();
    ir[2 * j + 1] = v[j].real();
  }
  auto shifted = [&](const std::vector<double>& dir, double s) {
    std::vector<double> y = x;
    for (std::size_t a = 0; a < y.size(); ++a) y[a] += s * h * dir[a];
    return u(y);
  };
  const double c = u(x);
  return (shifted(r, 1) + shifted(r, -1) + shifted(ir, 1) + shifted(ir, -1) - 4.0 * c) / (4.0 * h * h);
}

LeviReport levi_check(const std::function<double(const std::vector<double>&)>& u, const SampleRegion& region,
                      std::size_t samples, double h, double tol, std::uint64_t seed) {
  const std::size_t dim = region.radii.size();
  if (dim != 4 && dim != 8) throw ConfigError("levi_check: region must have 4 or 8 real coordinates");
  if (samples == 0) throw ConfigError("levi_check: need at least one sample");
  if (h <= 0.0) h = 1e-3 * region.diameter();
  LeviReport rep;
  rep.samples = samples;
  rep.h = h;
  std::vector<double> mins(samples), matrix_mins(samples);
  std::vector<std::size_t> rejected(samples, 0);
  const std::size_t max_attempts = 10000;
  parallel_chunks(samples, 1, [&](std::size_t, std::size_t i, std::size_t) {
    const CounterRng rng(seed, i);
    std::uint64_t k = 0;
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
      std::vector<double> x(dim);
      for (std::size_t a = 0; a < dim; ++a) x[a] = (2.0 * rng.uniform(k++) - 1.0) * region.radii[a];
      if (region.keep && !region.keep(x)) continue;
      const auto H = levi_matrix(u, x, h);
      bool finite = true;
      for (const auto& v : H) finite = finite && std::isfinite(v.real()) && std::isfinite(v.imag());
      if (!finite) {
        ++rejected[i];
        continue;
      }
      const auto eig = hermitian_eigen(H, static_cast<int>(dim / 2));
      double q = INFINITY;
      for (const auto& v : eig.vectors) q = std::min(q, directional_levi(u, x, v, h));
      mins[i] = q;
      matrix_mins[i] = eig.values.front();
      return;
    }
    throw NumericError("levi_check: could not draw a usable sample in the region");
  });
  std::size_t ok = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, mins[i]);
    rep.min_matrix_eigenvalue = std::min(rep.min_matrix_eigenvalue, matrix_mins[i]);
    ok += mins[i] >= -tol;
    rep.resampled += rejected[i];
  }
  rep.fraction = double(ok) / double(samples);
  return rep;
}

LeviReport levi_check(const Observable& obs, const SampleRegion& region, std::size_t samples, double h, double tol,
                      std::uint64_t seed) {
  if (region.radii.size() != 4) throw ConfigError("levi_check: observables live on C^2");
  auto f = obs.eval;
  return levi_check([f](const std::vector<double>& x) { return f(Point2C::from_real4({x[0], x[1], x[2], x[3]})); },
                    region, samples, h, tol, seed);
}

namespace {
double parse_number(const std::string& s, const std::string& label) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("observable '" + label + "': bad number '" + s + "'");
  }
}
}  // namespace

Observable parse_observable(const std::string& label, const ExtensionContext* ctx) {
  if (label == "coord_sq") return make_coord_sq();
  if (label == "re_z1") return make_re_z1();
  const auto colon = label.find(':');
  const std::string head = label.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : label.substr(colon + 1);
  if (head == "const" && !rest.empty()) return make_constant(parse_number(rest, label));
  if (head == "log_dist" && !rest.empty()) {
    std::array<double, 4> a{};
    std::stringstream ss(rest);
    std::string part;
    int k = 0;
    while (std::getline(ss, part, ',')) {
      if (k >= 4) throw ConfigError("observable '" + label + "': expected 4 coordinates");
      a[k++] = parse_number(part, label);
    }
    if (k != 4) throw ConfigError("observable '" + label + "': expected 4 coordinates");
    return make_log_distance(Point2C::from_real4(a));
  }
  if (head == "trunc") {
    const auto c2 = rest.find(':');
    if (c2 == std::string::npos) throw ConfigError("observable '" + label + "': expected trunc:M:inner");
    return truncate(parse_observable(rest.substr(c2 + 1), ctx), parse_number(rest.substr(0, c2), label));
  }
  if (head == "ext" && !rest.empty()) {
    if (!ctx) throw ConfigError("observable '" + label + "': extension needs a G_lambda context");
    return extend(parse_observable(rest, ctx), *ctx);
  }
  throw ConfigError("unknown observable '" + label + "'");
}

}  // namespace henon
