#include "henonlab/green.hpp"

#include <atomic>
#include <cfloat>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "binio.hpp"
#include "henonlab/parallel.hpp"

namespace henon {

namespace {

struct StepConstants {
  double log_lead;   // log |lead|
  double log_bound;  // log max(B, 1), B = |lead| + sum |q_i| + |c|
  double log_deg;
  double tail;       // (sum_{i<d} |q_i| + |c|) / |lead|
};

std::vector<StepConstants> constants(const std::vector<DirectedStep>& steps) {
  std::vector<StepConstants> out;
  for (const auto& s : steps) {
    double low = std::abs(s.coupling);
    for (int i = 0; i < s.q.degree(); ++i) low += std::abs(s.q.coeffs()[i]);
    double lead = std::abs(s.q.lead());
    out.push_back({std::log(lead), std::log(std::max(lead + low, 1.0)), std::log(double(s.q.degree())), low / lead});
  }
  return out;
}

// sum_{j >= m} (D_m / D_{j+1}) c_j over the periodic step sequence.
template <class F>
double periodic_tail(const std::vector<StepConstants>& k, std::size_t phase, F term) {
  const std::size_t P = k.size();
  double s = 0.0, logratio = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    const auto& c = k[(phase + i) % P];
    logratio -= c.log_deg;
    s += std::exp(logratio) * term(c);
  }
  return s / (1.0 - std::exp(logratio));
}

GreenValue green_directed(const HenonMap& map, const Point2C& q, Direction dir, double tol, int n_max) {
  const auto& steps = map.steps(dir);
  const auto k = constants(steps);
  const std::size_t P = steps.size();
  const double R = map.filtration_radius(dir);
  double A = 0.0;
  for (const auto& c : k) A = std::max(A, c.tail);
  const double entry = std::max(R, 2.0 * A);

  cplx e = dir == Direction::forward ? q.z1 : q.z2;
  cplx o = dir == Direction::forward ? q.z2 : q.z1;
  double logD = 0.0;
  const std::size_t budget = static_cast<std::size_t>(n_max) * P;
  std::optional<int> entered;

  for (std::size_t m = 0;; ++m) {
    const double ae = std::abs(e);
    if (ae >= entry && ae >= std::abs(o)) {
      if (!entered) entered = static_cast<int>(m / P);
      const double bound = std::exp(-logD) * 4.0 * A / (3.0 * ae);
      // Past 1e100 the next polynomial evaluation could overflow; the bound
      // is already far below any meaningful tolerance there.
      if (bound < tol || ae > 1e100) {
        const double lambda = periodic_tail(k, m % P, [](const StepConstants& c) { return c.log_lead; });
        const double scale = std::exp(-logD);
        // Plus an allowance for the rounding of the orbit and the logs.
        const double rounding = 64.0 * DBL_EPSILON * scale * (std::abs(std::log(ae)) + std::abs(lambda));
        return {scale * (std::log(ae) + lambda), bound + rounding, entered};
      }
    } else if (m >= budget) {
      const double M = std::max({std::abs(e), std::abs(o), 1.0});
      const double lb = periodic_tail(k, m % P, [](const StepConstants& c) { return c.log_bound; });
      return {0.0, std::exp(-logD) * (std::log(M) + lb), std::nullopt};
    }
    const auto& s = steps[m % P];
    cplx next = s.apply(e, o);
    if (!std::isfinite(next.real()) || !std::isfinite(next.imag()))
      throw EscapedToInfinity(m, dir == Direction::forward ? Point2C{e, o} : Point2C{o, e});
    o = e;
    e = next;
    logD += k[m % P].log_deg;
  }
}

}  // namespace

GreenValue green_point(const HenonMap& map, const Point2C& q, Direction dir, double tol, int n_max) {
  if (!(tol > 0.0)) throw ConfigError("green_point: tol must be positive");
  if (n_max < 1) throw ConfigError("green_point: n_max must be >= 1");
  if (!q.finite()) throw ConfigError("green_point: non-finite point");
  if (dir != Direction::combined) return green_directed(map, q, dir, tol, n_max);
  GreenValue p = green_directed(map, q, Direction::forward, tol, n_max);
  GreenValue m = green_directed(map, q, Direction::backward, tol, n_max);
  GreenValue out;
  out.value = std::max(p.value, m.value);
  out.error_bound = std::max(p.error_bound, m.error_bound);
  if (p.escape_step || m.escape_step)
    out.escape_step = std::min(p.escape_step.value_or(std::numeric_limits<int>::max()),
                               m.escape_step.value_or(std::numeric_limits<int>::max()));
  return out;
}

double green_potential_pullback(const HenonMap& map, const Point2C& q, int n, Direction dir) {
  if (n < 0) throw ConfigError("green_potential_pullback: n must be >= 0");
  if (dir == Direction::combined) throw ConfigError("green_potential_pullback: needs forward or backward");
  const auto& steps = map.steps(dir);
  cplx e = dir == Direction::forward ? q.z1 : q.z2;
  cplx o = dir == Direction::forward ? q.z2 : q.z1;
  bool logscale = false;
  double le = 0.0, lo = 0.0;
  const std::size_t total = static_cast<std::size_t>(n) * steps.size();
  for (std::size_t m = 0; m < total; ++m) {
    const auto& s = steps[m % steps.size()];
    if (!logscale && std::abs(e) > 1e100 && std::abs(e) >= std::abs(o)) {
      logscale = true;
      le = std::log(std::abs(e));
      lo = std::log(std::abs(o));
    }
    if (logscale) {
      // Lower-order terms are below double resolution relative to |e|^d.
      const double next = s.q.degree() * le + std::log(std::abs(s.q.lead()));
      lo = le;
      le = next;
    } else {
      cplx next = s.apply(e, o);
      if (!std::isfinite(next.real()) || !std::isfinite(next.imag())) throw EscapedToInfinity(m, {e, o});
      o = e;
      e = next;
    }
  }
  double half_log;
  if (!logscale) {
    half_log = 0.5 * std::log1p(std::norm(e) + std::norm(o));
  } else {
    half_log = le + 0.5 * std::log1p(std::exp(2.0 * (lo - le)) + std::exp(-2.0 * le));
  }
  return half_log * std::pow(double(map.degree()), -double(n));
}

MollifierKernel MollifierKernel::make(double radius, const std::array<double, 4>& spacing) {
  if (!(radius >= 0.0) || !std::isfinite(radius)) throw ConfigError("mollifier radius must be >= 0");
  MollifierKernel k;
  k.radius = radius;
  k.spacing = spacing;
  std::array<int, 4> span{};
  for (int a = 0; a < 4; ++a) {
    if (!(spacing[a] > 0.0)) throw ConfigError("mollifier spacing must be positive");
    span[a] = static_cast<int>(std::ceil(radius / spacing[a]));
  }
  const double r2 = radius * radius;
  double total = 0.0;
  for (int a = -span[0]; a <= span[0]; ++a)
    for (int b = -span[1]; b <= span[1]; ++b)
      for (int c = -span[2]; c <= span[2]; ++c)
        for (int d = -span[3]; d <= span[3]; ++d) {
          const double x0 = a * spacing[0], x1 = b * spacing[1], x2 = c * spacing[2], x3 = d * spacing[3];
          const double q2 = x0 * x0 + x1 * x1 + x2 * x2 + x3 * x3;
          if (q2 >= r2 && !(a == 0 && b == 0 && c == 0 && d == 0)) continue;
          const double t = r2 > 0 ? 1.0 - q2 / r2 : 1.0;
          const double w = t * t;
          k.taps.push_back({{a, b, c, d}, w});
          total += w;
          k.reach = std::max({k.reach, std::abs(a), std::abs(b), std::abs(c), std::abs(d)});
        }
  for (auto& t : k.taps) t.weight /= total;
  return k;
}

namespace {
std::array<double, 4> spacings(const GridGeometry& g) {
  return {g.spacing(0), g.spacing(1), g.spacing(2), g.spacing(3)};
}
}  // namespace

int GreenField::contamination_margin() const {
  if (raw()) return 0;
  return MollifierKernel::make(mollification_radius, spacings(geometry)).reach;
}

std::optional<double> GreenField::interpolate(const Point2C& q) const {
  if (!geometry.contains(q)) return std::nullopt;
  const auto x = q.real4();
  Index4 base{};
  std::array<double, 4> frac{};
  for (int a = 0; a < 4; ++a) {
    const double u = (x[a] + geometry.radii[a]) / geometry.spacing(a);
    const auto top = geometry.resolution[a] - 2;
    const auto i = static_cast<std::uint32_t>(std::min(std::max(std::floor(u), 0.0), double(top)));
    base[a] = i;
    frac[a] = std::clamp(u - i, 0.0, 1.0);
  }
  double s = 0.0;
  for (int corner = 0; corner < 16; ++corner) {
    double w = 1.0;
    Index4 ix = base;
    for (int a = 0; a < 4; ++a) {
      const bool up = (corner >> a) & 1;
      ix[a] += up;
      w *= up ? frac[a] : 1.0 - frac[a];
    }
    if (w != 0.0) s += w * at(ix);
  }
  return s;
}

double GreenField::min() const { return *std::min_element(values.begin(), values.end()); }
double GreenField::max() const { return *std::max_element(values.begin(), values.end()); }

GreenField build_field(const HenonMap& map, const GridGeometry& geometry, Direction dir, double tol,
                       const BuildLimits& limits) {
  geometry.validate();
  if (!(tol > 0.0)) throw ConfigError("build_field: tol must be positive");
  double need = 0.0;
  if (dir != Direction::backward) need = std::max(need, map.filtration_radius(Direction::forward));
  if (dir != Direction::forward) need = std::max(need, map.filtration_radius(Direction::backward));
  for (double r : geometry.radii)
    if (r < need) throw ConfigError("build_field: box does not contain the filtration polydisk");

  const std::size_t n = geometry.size();
  if (n > limits.max_nodes)
    throw ResourceLimitError("build_field: grid has " + std::to_string(n) + " nodes, limit " +
                                 std::to_string(limits.max_nodes),
                             0, n);
  GreenField f;
  f.geometry = geometry;
  f.direction = dir;
  f.tol = tol;
  f.values.assign(n, 0.0);

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::atomic<std::size_t> done{0};
  std::atomic<bool> timed_out{false};
  parallel_chunks(n, 4096, [&](std::size_t, std::size_t b, std::size_t e) {
    if (timed_out.load(std::memory_order_relaxed)) return;
    for (std::size_t i = b; i < e; ++i)
      f.values[i] = green_point(map, geometry.point(i), dir, tol, limits.n_max).value;
    done += e - b;
    if (limits.max_seconds > 0 &&
        std::chrono::duration<double>(clock::now() - start).count() > limits.max_seconds)
      timed_out = true;
  });
  if (timed_out)
    throw ResourceLimitError("build_field: time limit exceeded after " + std::to_string(done.load()) + " of " +
                                 std::to_string(n) + " nodes",
                             done.load(), n);
  return f;
}

GreenField combine(const GreenField& plus, const GreenField& minus) {
  if (!(plus.geometry == minus.geometry)) throw ConfigError("combine: geometry mismatch");
  if (plus.mollification_radius != minus.mollification_radius)
    throw ConfigError("combine: mollification mismatch");
  GreenField out = plus;
  out.direction = Direction::combined;
  out.tol = std::max(plus.tol, minus.tol);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = std::max(plus.values[i], minus.values[i]);
  return out;
}

GreenField mollify(const GreenField& field, double radius) {
  if (!(radius >= 0.0)) throw ConfigError("mollify: radius must be >= 0");
  if (!field.raw()) throw ConfigError("mollify: field is already mollified");
  if (radius == 0.0) return field;
  const auto& g = field.geometry;
  for (int a = 0; a < 4; ++a)
    if (radius > 0.5 * g.radii[a])
      throw ConfigError("mollify: radius exceeds a quarter of the box (boundary contamination)");

  const auto kernel = MollifierKernel::make(radius, spacings(g));
  std::vector<std::ptrdiff_t> delta;
  for (const auto& t : kernel.taps) {
    std::ptrdiff_t d = 0;
    for (int a = 0; a < 4; ++a) d += t.offset[a] * static_cast<std::ptrdiff_t>(g.stride(a));
    delta.push_back(d);
  }

  GreenField out = field;
  out.mollification_radius = radius;
  const auto reach = static_cast<std::uint32_t>(kernel.reach);
  const double* src = field.values.data();
  parallel_chunks(g.size(), 8192, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Index4 ix = g.unravel(i);
      double s = 0.0;
      if (g.boundary_distance(ix) >= reach) {
        for (std::size_t t = 0; t < delta.size(); ++t) s += kernel.taps[t].weight * src[i + delta[t]];
      } else {
        double ws = 0.0;
        for (std::size_t t = 0; t < delta.size(); ++t) {
          bool inside = true;
          for (int a = 0; a < 4 && inside; ++a) {
            const long j = long(ix[a]) + kernel.taps[t].offset[a];
            inside = j >= 0 && j < long(g.resolution[a]);
          }
          if (!inside) continue;
          s += kernel.taps[t].weight * src[i + delta[t]];
          ws += kernel.taps[t].weight;
        }
        s /= ws;
      }
      out.values[i] = s;
    }
  });
  return out;
}

MollifiedGreen::MollifiedGreen(HenonMap map, MollifierKernel kernel, Direction dir, double tol, int n_max)
    : map_(std::move(map)), kernel_(std::move(kernel)), dir_(dir), tol_(tol), n_max_(n_max) {}

double MollifiedGreen::operator()(const Point2C& q) const {
  const auto x = q.real4();
  double s = 0.0;
  for (const auto& t : kernel_.taps) {
    std::array<double, 4> y;
    for (int a = 0; a < 4; ++a) y[a] = x[a] + t.offset[a] * kernel_.spacing[a];
    s += t.weight * green_point(map_, Point2C::from_real4(y), dir_, tol_, n_max_).value;
  }
  return s;
}

SublevelThresholds sublevel_thresholds(const GreenField& raw, const GreenField& mollified, double delta,
                                       double split) {
  if (!(delta > 0.0)) throw ConfigError("sublevel_thresholds: delta must be positive");
  if (!(split > 0.0 && split < 1.0)) throw ConfigError("sublevel_thresholds: split must lie in (0, 1)");
  if (!raw.raw()) throw ConfigError("sublevel_thresholds: first field must be raw");
  if (mollified.raw()) throw ConfigError("sublevel_thresholds: second field must be mollified");
  if (!(raw.geometry == mollified.geometry)) throw ConfigError("sublevel_thresholds: geometry mismatch");
  if (delta >= raw.max())
    throw NumericError("sublevel_thresholds: delta exceeds the field maximum, no strict nesting exists");

  const auto& g = raw.geometry;
  SublevelThresholds t;
  t.delta = delta;
  double k1 = -std::numeric_limits<double>::infinity();
  double cut = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (raw.values[i] < delta) {
      ++t.delta_nodes;
      k1 = std::max(k1, mollified.values[i]);
    }
    if (g.boundary_distance(g.unravel(i)) <= 1) cut = std::min(cut, mollified.values[i]);
  }
  if (t.delta_nodes == 0)
    throw NumericError("sublevel_thresholds: no grid node has G < delta; raise delta or refine the grid");
  t.kappa1 = std::nextafter(k1, std::numeric_limits<double>::infinity());
  t.kappa_cut = cut;
  if (!(t.kappa1 < t.kappa_cut))
    throw NumericError("sublevel_thresholds: nesting infeasible (kappa1 " + std::to_string(t.kappa1) +
                       " >= boundary level " + std::to_string(cut) +
                       "); use a smaller mollification radius or a larger box");
  t.kappa2 = t.kappa1 + split * (t.kappa_cut - t.kappa1);
  return t;
}

double default_delta(const GreenField& raw) {
  const auto& g = raw.geometry;
  double outer = std::numeric_limits<double>::infinity();
  double inner = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto d = g.boundary_distance(g.unravel(i));
    if (d == 0) outer = std::min(outer, raw.values[i]);
    if (d >= 2) inner = std::min(inner, raw.values[i]);
  }
  if (!(inner < outer))
    throw NumericError("default_delta: G does not dip below its boundary minimum inside the box");
  return 0.5 * (inner + outer);
}

namespace {
constexpr std::uint32_t kFieldVersion = 1;
}

void write_field(std::ostream& os, const GreenField& f) {
  os.write("GRNF", 4);
  binio::put<std::uint32_t>(os, kFieldVersion);
  binio::put<std::uint8_t>(os, static_cast<std::uint8_t>(f.direction));
  for (auto r : f.geometry.resolution) binio::put<std::uint32_t>(os, r);
  for (auto r : f.geometry.radii) binio::put<double>(os, r);
  binio::put<double>(os, f.mollification_radius);
  binio::put<double>(os, f.tol);
  for (double v : f.values) binio::put<double>(os, v);
  if (!os) throw Error("GRNF: write failed");
}

GreenField read_field(std::istream& is) {
  binio::expect_magic(is, "GRNF");
  const auto version = binio::get<std::uint32_t>(is, "GRNF");
  if (version != kFieldVersion) throw Error("GRNF: unsupported version " + std::to_string(version));
  GreenField f;
  const auto dir = binio::get<std::uint8_t>(is, "GRNF");
  if (dir > 2) throw Error("GRNF: bad direction byte");
  f.direction = static_cast<Direction>(dir);
  for (auto& r : f.geometry.resolution) r = binio::get<std::uint32_t>(is, "GRNF");
  for (auto& r : f.geometry.radii) r = binio::get<double>(is, "GRNF");
  f.mollification_radius = binio::get<double>(is, "GRNF");
  f.tol = binio::get<double>(is, "GRNF");
  for (int a = 0; a < 4; ++a)
    if (f.geometry.resolution[a] < 2 || !(f.geometry.radii[a] > 0)) throw Error("GRNF: bad geometry");
  f.values.resize(f.geometry.size());
  for (auto& v : f.values) v = binio::get<double>(is, "GRNF");
  return f;
}

void save_field(const std::string& path, const GreenField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_field(os, f);
}

GreenField load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  return read_field(is);
}

}  // namespace henon
