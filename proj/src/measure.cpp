#include "henonlab/measure.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "binio.hpp"
#include "henonlab/parallel.hpp"

namespace henon {

double Hermitian2::min_eigenvalue() const {
  const double m = 0.5 * (h11 + h22), r = std::hypot(0.5 * (h11 - h22), std::abs(h12));
  return m - r;
}

double Hermitian2::max_eigenvalue() const {
  const double m = 0.5 * (h11 + h22), r = std::hypot(0.5 * (h11 - h22), std::abs(h12));
  return m + r;
}

Hermitian2 complex_hessian(const RealHessian4& d) {
  Hermitian2 h;
  h.h11 = 0.25 * (d[0][0] + d[1][1]);
  h.h22 = 0.25 * (d[2][2] + d[3][3]);
  h.h12 = cplx(0.25 * (d[0][2] + d[1][3]), 0.25 * (d[0][3] - d[1][2]));
  return h;
}

namespace {

std::array<double, 4> spacings(const GridGeometry& g) {
  return {g.spacing(0), g.spacing(1), g.spacing(2), g.spacing(3)};
}

std::array<std::ptrdiff_t, 4> strides(const GridGeometry& g) {
  return {std::ptrdiff_t(g.stride(0)), std::ptrdiff_t(g.stride(1)), std::ptrdiff_t(g.stride(2)),
          std::ptrdiff_t(g.stride(3))};
}

Hermitian2 hessian_at(const double* v, std::size_t idx, const std::array<std::ptrdiff_t, 4>& st,
                      const std::array<double, 4>& h) {
  return complex_hessian(stencil_hessian(
      [&](const std::array<int, 4>& o) {
        return v[std::ptrdiff_t(idx) + o[0] * st[0] + o[1] * st[1] + o[2] * st[2] + o[3] * st[3]];
      },
      h));
}

struct Neumaier {
  double sum = 0.0, c = 0.0;
  void add(double x) {
    const double t = sum + x;
    c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

}  // namespace

double compensated_sum(const std::vector<double>& v) {
  Neumaier s;
  for (double x : v) s.add(x);
  return s.value();
}

Hermitian2 mixed_hessian(const GreenField& field, const Index4& node) {
  if (field.raw()) throw ConfigError("mixed_hessian: field must be mollified");
  const auto& g = field.geometry;
  for (int a = 0; a < 4; ++a)
    if (node[a] >= g.resolution[a]) throw ConfigError("mixed_hessian: node outside the grid");
  if (g.boundary_distance(node) < 1) throw ConfigError("mixed_hessian: node on the box boundary");
  return hessian_at(field.values.data(), g.ravel(node), strides(g), spacings(g));
}

double wedge_density(const Hermitian2& p, const Hermitian2& m, double kappa) {
  return kappa * (p.h11 * m.h22 + p.h22 * m.h11 - 2.0 * (p.h12 * std::conj(m.h12)).real());
}

double fubini_study_sum(double radius, double spacing) {
  if (!(radius > 0.0 && spacing > 0.0)) throw ConfigError("calibration: radius and spacing must be positive");
  const auto n = static_cast<std::size_t>(std::llround(2.0 * radius / spacing)) + 1;
  if (n < 5) throw ConfigError("calibration: grid too small");
  const double h = 2.0 * radius / double(n - 1);
  const std::size_t slab = n * n * n;
  auto x = [&](std::size_t i) { return -radius + double(i) * h; };
  auto fill = [&](std::vector<double>& s, std::size_t i0) {
    const double a = x(i0) * x(i0);
    for (std::size_t i1 = 0; i1 < n; ++i1)
      for (std::size_t i2 = 0; i2 < n; ++i2)
        for (std::size_t i3 = 0; i3 < n; ++i3) {
          const double r2 = a + x(i1) * x(i1) + x(i2) * x(i2) + x(i3) * x(i3);
          s[(i1 * n + i2) * n + i3] = 0.5 * std::log1p(r2);
        }
  };
  std::array<std::vector<double>, 3> ring;
  for (auto& s : ring) s.resize(slab);
  fill(ring[0], 0);
  fill(ring[1], 1);
  const std::array<double, 4> hh{h, h, h, h};
  const double vol = h * h * h * h;
  Neumaier total;
  for (std::size_t i0 = 1; i0 + 1 < n; ++i0) {
    fill(ring[(i0 + 1) % 3], i0 + 1);
    const double* s[3] = {ring[(i0 + 2) % 3].data(), ring[i0 % 3].data(), ring[(i0 + 1) % 3].data()};
    std::vector<double> part(n, 0.0);
    parallel_chunks(n - 2, 1, [&](std::size_t, std::size_t b, std::size_t) {
      const std::size_t i1 = b + 1;
      Neumaier acc;
      for (std::size_t i2 = 1; i2 + 1 < n; ++i2)
        for (std::size_t i3 = 1; i3 + 1 < n; ++i3) {
          const std::size_t c = (i1 * n + i2) * n + i3;
          auto u = [&](const std::array<int, 4>& o) {
            return s[1 + o[0]][std::ptrdiff_t(c) + (o[1] * std::ptrdiff_t(n) + o[2]) * std::ptrdiff_t(n) + o[3]];
          };
          const auto H = complex_hessian(stencil_hessian(u, hh));
          acc.add(wedge_density(H, H, 1.0) * vol);
        }
      part[i1] = acc.value();
    });
    for (double p : part) total.add(p);
  }
  return total.value();
}

Calibration calibrate(double spacing, const std::vector<double>& radii) {
  if (radii.size() < 2) throw ConfigError("calibration needs at least two box radii");
  if (!std::is_sorted(radii.begin(), radii.end())) throw ConfigError("calibration radii must be increasing");
  Calibration c;
  c.spacing = spacing;
  for (double r : radii)
    c.boxes.push_back({r, static_cast<std::uint32_t>(std::llround(2.0 * r / spacing)) + 1, fubini_study_sum(r, spacing)});
  const auto& a = c.boxes[c.boxes.size() - 2];
  const auto& b = c.boxes.back();
  const double ra = a.radius * a.radius, rb = b.radius * b.radius;
  c.extrapolated_sum = (rb * b.sum - ra * a.sum) / (rb - ra);
  if (!(c.extrapolated_sum > 0.0)) throw NumericError("calibration: nonpositive Fubini-Study mass");
  c.kappa = 1.0 / c.extrapolated_sum;
  return c;
}

double DiscreteMeasure::clipped_fraction() const {
  const double tv = raw_total + 2.0 * clipped_mass;
  return tv > 0.0 ? clipped_mass / tv : 0.0;
}

std::vector<std::size_t> DiscreteMeasure::support() const {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < masses.size(); ++i)
    if (masses[i] > 0.0) s.push_back(i);
  return s;
}

DiscreteMeasure build_measure(const GreenField& plus, const GreenField& minus, const MeasureOptions& opt) {
  if (!(plus.geometry == minus.geometry)) throw ConfigError("build_measure: geometry mismatch");
  if (plus.raw() || minus.raw()) throw ConfigError("build_measure: both fields must be mollified");
  const auto& g = plus.geometry;
  const int margin = opt.margin >= 0 ? opt.margin : std::max(plus.contamination_margin(), minus.contamination_margin()) + 2;
  const auto lo = static_cast<std::uint32_t>(std::max(margin, 1));

  DiscreteMeasure mu;
  mu.geometry = g;
  mu.masses.assign(g.size(), 0.0);
  const auto st = strides(g);
  const auto h = spacings(g);
  const double vol = g.cell_volume();
  const double* vp = plus.values.data();
  const double* vm = minus.values.data();
  const std::size_t chunk = 16384;
  const std::size_t nchunks = (g.size() + chunk - 1) / chunk;
  std::vector<double> pos(nchunks, 0.0), neg(nchunks, 0.0);
  parallel_chunks(g.size(), chunk, [&](std::size_t ci, std::size_t b, std::size_t e) {
    Neumaier sp, sn;
    for (std::size_t i = b; i < e; ++i) {
      if (g.boundary_distance(g.unravel(i)) < lo) continue;
      const double m = wedge_density(hessian_at(vp, i, st, h), hessian_at(vm, i, st, h), opt.kappa) * vol;
      if (m > 0.0) {
        mu.masses[i] = m;
        sp.add(m);
      } else if (m < 0.0) {
        sn.add(-m);
      }
    }
    pos[ci] = sp.value();
    neg[ci] = sn.value();
  });
  const double p = compensated_sum(pos);
  mu.clipped_mass = compensated_sum(neg);
  mu.raw_total = p - mu.clipped_mass;
  if (!(mu.raw_total >= 1e-6) || !(p > 0.0))
    throw NumericError("build_measure: empty measure (raw total " + std::to_string(mu.raw_total) +
                       "); check the box and the Green fields");
  if (mu.clipped_fraction() > opt.clip_ceiling)
    throw NumericError("build_measure: clipped fraction " + std::to_string(mu.clipped_fraction()) +
                       " exceeds the ceiling; use a larger mollification radius");
  for (auto& m : mu.masses) m /= p;
  return mu;
}

namespace {

struct AliasTable {
  std::vector<std::size_t> cells;
  std::vector<double> prob;
  std::vector<std::uint32_t> alias;
};

AliasTable make_alias(const DiscreteMeasure& mu) {
  AliasTable t;
  t.cells = mu.support();
  const std::size_t n = t.cells.size();
  if (n == 0) throw NumericError("sample: measure has no mass");
  std::vector<double> w(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += mu.masses[t.cells[i]];
  for (std::size_t i = 0; i < n; ++i) w[i] = mu.masses[t.cells[i]] * double(n) / total;
  t.prob.assign(n, 1.0);
  t.alias.resize(n);
  std::iota(t.alias.begin(), t.alias.end(), 0u);
  std::vector<std::uint32_t> small, large;
  for (std::uint32_t i = 0; i < n; ++i) (w[i] < 1.0 ? small : large).push_back(i);
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto l = large.back();
    t.prob[s] = w[s];
    t.alias[s] = l;
    w[l] -= 1.0 - w[s];
    if (w[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  return t;
}

}  // namespace

std::vector<Point2C> sample(const DiscreteMeasure& mu, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("sample: count must be >= 1");
  const auto t = make_alias(mu);
  const CounterRng rng(seed, 0x5a4d);
  const auto& g = mu.geometry;
  std::vector<Point2C> out(count);
  parallel_chunks(count, 4096, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const std::uint64_t k = 6 * std::uint64_t(i);
      const std::size_t n = t.cells.size();
      const auto slot = std::min<std::size_t>(static_cast<std::size_t>(rng.uniform(k) * double(n)), n - 1);
      const std::size_t pick = rng.uniform(k + 1) < t.prob[slot] ? slot : t.alias[slot];
      const auto ix = g.unravel(t.cells[pick]);
      std::array<double, 4> x;
      for (int a = 0; a < 4; ++a) {
        const double y = g.coord(a, ix[a]) + (rng.uniform(k + 2 + a) - 0.5) * g.spacing(a);
        x[a] = std::clamp(y, -g.radii[a], g.radii[a]);
      }
      out[i] = Point2C::from_real4(x);
    }
  });
  return out;
}

IntegralReport integrate(const DiscreteMeasure& mu, const std::function<double(const Point2C&)>& obs, double floor) {
  const auto cells = mu.support();
  const std::size_t chunk = 1024;
  const std::size_t nchunks = (cells.size() + chunk - 1) / chunk;
  std::vector<double> part(nchunks, 0.0);
  std::vector<std::size_t> floored(nchunks, 0);
  parallel_chunks(cells.size(), chunk, [&](std::size_t ci, std::size_t b, std::size_t e) {
    Neumaier s;
    for (std::size_t i = b; i < e; ++i) {
      double v = obs(mu.center(cells[i]));
      if (!std::isfinite(v)) {
        if (v > 0) throw NumericError("integrate: observable is +inf at a cell centre");
        v = floor;
        ++floored[ci];
      }
      s.add(mu.masses[cells[i]] * v);
    }
    part[ci] = s.value();
  });
  IntegralReport r;
  r.value = compensated_sum(part);
  r.floored = std::accumulate(floored.begin(), floored.end(), std::size_t{0});
  return r;
}

double integrate_field(const DiscreteMeasure& mu, const GreenField& field) {
  if (!(mu.geometry == field.geometry)) throw ConfigError("integrate_field: geometry mismatch");
  Neumaier s;
  for (std::size_t i = 0; i < mu.masses.size(); ++i)
    if (mu.masses[i] > 0.0) s.add(mu.masses[i] * field.values[i]);
  return s.value();
}

namespace {
constexpr std::uint32_t kMeasureVersion = 1;
}

void write_measure(std::ostream& os, const DiscreteMeasure& mu) {
  os.write("EQMS", 4);
  binio::put<std::uint32_t>(os, kMeasureVersion);
  for (auto r : mu.geometry.resolution) binio::put<std::uint32_t>(os, r);
  for (auto r : mu.geometry.radii) binio::put<double>(os, r);
  binio::put<double>(os, mu.clipped_mass);
  binio::put<double>(os, mu.raw_total);
  for (double m : mu.masses) binio::put<double>(os, m);
  if (!os) throw Error("EQMS: write failed");
}

DiscreteMeasure read_measure(std::istream& is) {
  binio::expect_magic(is, "EQMS");
  const auto version = binio::get<std::uint32_t>(is, "EQMS");
  if (version != kMeasureVersion) throw Error("EQMS: unsupported version " + std::to_string(version));
  DiscreteMeasure mu;
  for (auto& r : mu.geometry.resolution) r = binio::get<std::uint32_t>(is, "EQMS");
  for (auto& r : mu.geometry.radii) r = binio::get<double>(is, "EQMS");
  for (int a = 0; a < 4; ++a)
    if (mu.geometry.resolution[a] < 2 || !(mu.geometry.radii[a] > 0)) throw Error("EQMS: bad geometry");
  mu.clipped_mass = binio::get<double>(is, "EQMS");
  mu.raw_total = binio::get<double>(is, "EQMS");
  mu.masses.resize(mu.geometry.size());
  for (auto& m : mu.masses) m = binio::get<double>(is, "EQMS");
  return mu;
}

void save_measure(const std::string& path, const DiscreteMeasure& mu) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_measure(os, mu);
}

DiscreteMeasure load_measure(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  return read_measure(is);
}

void write_measure_csv(std::ostream& os, const DiscreteMeasure& mu) {
  os << "cell,x1,y1,x2,y2,mass\n";
  char buf[256];
  for (std::size_t i = 0; i < mu.masses.size(); ++i) {
    if (!(mu.masses[i] > 0.0)) continue;
    const auto x = mu.center(i).real4();
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, x[0], x[1], x[2], x[3], mu.masses[i]);
    os << buf;
  }
}

}  // namespace henon
