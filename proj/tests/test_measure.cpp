#include <cstring>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "henonlab/measure.hpp"

using namespace henon;

namespace {
GreenField synthetic(const GridGeometry& g, const std::function<double(const Point2C&)>& u) {
  GreenField f;
  f.geometry = g;
  f.mollification_radius = 1.0;  // treated as smooth
  f.values.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) f.values[i] = u(g.point(i));
  return f;
}
double fs(const Point2C& q) { return 0.5 * std::log1p(std::norm(q.z1) + std::norm(q.z2)); }
}  // namespace

TEST_CASE("complex Hessian of synthetic fields") {
  auto g = GridGeometry::cube(1.0, 9);
  auto sq = synthetic(g, [](const Point2C& q) { return std::norm(q.z1) + std::norm(q.z2); });
  auto h = mixed_hessian(sq, {3, 5, 4, 2});
  CHECK(h.h11 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h.h22 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(h.h12) < 1e-12);

  auto re = synthetic(g, [](const Point2C& q) { return q.z1.real(); });
  auto z = mixed_hessian(re, {4, 4, 4, 4});
  CHECK(std::abs(z.h11) < 1e-12);
  CHECK(std::abs(z.h22) < 1e-12);
  CHECK(std::abs(z.h12) < 1e-12);

  // Re(z1 zbar2) has h12 = 1/2
  auto mix = synthetic(g, [](const Point2C& q) { return (q.z1 * std::conj(q.z2)).real(); });
  auto hm = mixed_hessian(mix, {4, 3, 5, 4});
  CHECK(hm.h12.real() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(hm.h12.imag()) < 1e-12);
  // Im(z1 zbar2): d^2/dz1 dzbar2 of (z1 zbar2 - zbar1 z2)/(2i) = 1/(2i)
  auto im = synthetic(g, [](const Point2C& q) { return (q.z1 * std::conj(q.z2)).imag(); });
  auto hi = mixed_hessian(im, {4, 3, 5, 4});
  CHECK(hi.h12.imag() == doctest::Approx(-0.5).epsilon(1e-12));

  for (double step : {0.1, 0.05}) {
    auto gg = GridGeometry::cube(4 * step, 9);
    auto f = synthetic(gg, fs);
    auto hf = mixed_hessian(f, {4, 4, 4, 4});
    CHECK(std::abs(hf.h11 - 0.5) < 2 * step * step);
    CHECK(std::abs(hf.h22 - 0.5) < 2 * step * step);
    CHECK(std::abs(hf.h12) < 1e-12);
  }

  CHECK_THROWS_AS(mixed_hessian(sq, {0, 4, 4, 4}), ConfigError);
  auto raw = sq;
  raw.mollification_radius = 0.0;
  CHECK_THROWS_AS(mixed_hessian(raw, {4, 4, 4, 4}), ConfigError);
}

TEST_CASE("wedge density") {
  const double k = 0.7;
  CHECK(wedge_density(Hermitian2::identity(), Hermitian2::identity(), k) == doctest::Approx(2 * k));
  CHECK(wedge_density(Hermitian2{}, Hermitian2::identity(), k) == 0.0);
  Hermitian2 a{2.0, 1.0, {0.5, 0.25}}, b{1.0, 3.0, {-0.2, 0.1}};
  // symmetric in its arguments
  CHECK(wedge_density(a, b, k) == doctest::Approx(wedge_density(b, a, k)));
  // self wedge is twice the determinant
  CHECK(wedge_density(a, a, 1.0) == doctest::Approx(2 * (a.h11 * a.h22 - std::norm(a.h12))));
  CHECK(a.min_eigenvalue() == doctest::Approx(1.5 - std::sqrt(0.25 + 0.3125)));
}

TEST_CASE("Fubini-Study densities are nonnegative") {
  auto g = GridGeometry::cube(3.0, 13);
  auto f = synthetic(g, fs);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto ix = g.unravel(i);
    if (g.boundary_distance(ix) < 1) continue;
    auto h = mixed_hessian(f, ix);
    CHECK(wedge_density(h, h, 1.0) >= 0.0);
  }
}

TEST_CASE("Fubini-Study calibration") {
  // Ball mass inside radius R is R^4 / (1 + R^2)^2; the cube sums sit above it.
  const double s4 = kAnalyticKappa * fubini_study_sum(4.0, 0.25);
  CHECK(s4 > 256.0 / 289.0 - 0.01);
  CHECK(s4 < 1.0);
  auto c = calibrate(0.25, {6.0, 9.0});
  CHECK(c.kappa == doctest::Approx(kAnalyticKappa).epsilon(0.03));
  CHECK(c.calibration_mass() == doctest::Approx(1.0).epsilon(0.03));
  CHECK(c.boxes[1].nodes == 73);
  CHECK_THROWS_AS(calibrate(0.25, {6.0}), ConfigError);
}

TEST_CASE("build_measure on synthetic fields") {
  auto g = GridGeometry::cube(1.0, 11);
  auto p = synthetic(g, [](const Point2C& q) { return std::norm(q.z1) + std::norm(q.z2); });
  auto m = synthetic(g, [](const Point2C& q) { return std::norm(q.z1); });
  MeasureOptions opt;
  opt.margin = 2;
  auto mu = build_measure(p, m, opt);
  // density kappa everywhere on the 7^4 kept cells
  CHECK(mu.raw_total == doctest::Approx(kAnalyticKappa * 2401 * g.cell_volume()).epsilon(1e-10));
  CHECK(mu.clipped_mass == 0.0);
  CHECK(compensated_sum(mu.masses) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mu.support().size() == 2401);
  for (auto c : mu.support()) CHECK(mu.masses[c] == doctest::Approx(1.0 / 2401));

  auto zero = synthetic(g, [](const Point2C&) { return 0.0; });
  CHECK_THROWS_AS(build_measure(p, zero, opt), NumericError);
  auto other = synthetic(GridGeometry::cube(1.5, 11), [](const Point2C&) { return 0.0; });
  CHECK_THROWS_AS(build_measure(p, other, opt), ConfigError);

  // negative part is clipped and accounted
  auto neg = synthetic(g, [](const Point2C& q) { return std::norm(q.z1) - 0.2 * std::norm(q.z2); });
  opt.clip_ceiling = 1.0;
  auto mc = build_measure(p, neg, opt);
  CHECK(mc.clipped_mass == 0.0);
  auto saddle = synthetic(g, [](const Point2C& q) { return q.z1.real() > 0 ? std::norm(q.z1) : -0.3 * std::norm(q.z1); });
  auto ms = build_measure(p, saddle, opt);
  CHECK(ms.clipped_mass > 0.0);
  CHECK(ms.clipped_fraction() > 0.2);
  opt.clip_ceiling = 0.05;
  CHECK_THROWS_AS(build_measure(p, saddle, opt), NumericError);
}

TEST_CASE("sampling") {
  auto g = GridGeometry::cube(1.0, 8);
  DiscreteMeasure one;
  one.geometry = g;
  one.masses.assign(g.size(), 0.0);
  const Index4 cell{3, 4, 2, 5};
  one.masses[g.ravel(cell)] = 1.0;
  for (const auto& q : sample(one, 1000, 1)) CHECK(*g.nearest_node(q) == g.ravel(cell));

  DiscreteMeasure mu;
  mu.geometry = g;
  mu.masses.assign(g.size(), 0.0);
  std::vector<std::size_t> cells{10, 500, 1234, 3000, 4095};
  std::vector<double> w{0.05, 0.1, 0.15, 0.3, 0.4};
  for (std::size_t i = 0; i < cells.size(); ++i) mu.masses[cells[i]] = w[i];
  const std::size_t N = 1000000;
  auto s = sample(mu, N, 42);
  std::map<std::size_t, std::size_t> counts;
  for (const auto& q : s) ++counts[*g.nearest_node(q)];
  CHECK(counts.size() == cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double sigma = std::sqrt(N * w[i] * (1 - w[i]));
    CHECK(std::abs(double(counts[cells[i]]) - N * w[i]) < 4 * sigma);
  }
  auto again = sample(mu, 1000, 42);
  CHECK(std::equal(again.begin(), again.end(), s.begin()));
  CHECK(!std::equal(again.begin(), again.end(), sample(mu, 1000, 43).begin()));
}

TEST_CASE("integrate") {
  auto g = GridGeometry::cube(1.0, 8);
  DiscreteMeasure mu;
  mu.geometry = g;
  mu.masses.assign(g.size(), 0.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double t = 0.0;
  for (std::size_t i = 0; i < g.size(); i += 7) t += (mu.masses[i] = u(rng));
  for (auto& m : mu.masses) m /= t;
  CHECK(integrate(mu, [](const Point2C&) { return 1.0; }).value == doctest::Approx(1.0).epsilon(1e-15));
  auto phi = [](const Point2C& q) { return std::sin(q.z1.real()) + q.z2.imag(); };
  auto psi = [](const Point2C& q) { return std::norm(q.z1) - q.z2.real(); };
  const double a = 2.5, b = -1.25;
  const double lin = integrate(mu, [&](const Point2C& q) { return a * phi(q) + b * psi(q); }).value;
  CHECK(lin == doctest::Approx(a * integrate(mu, phi).value + b * integrate(mu, psi).value).epsilon(1e-14));
  auto sing = integrate(mu, [&](const Point2C& q) { return q == mu.center(0) ? -INFINITY : 0.0; }, -7.0);
  CHECK(sing.floored == 1);
  CHECK(sing.value == doctest::Approx(-7.0 * mu.masses[0]));
}

TEST_CASE("EQMS and CSV") {
  auto g = GridGeometry::cube(1.0, 8);
  DiscreteMeasure mu;
  mu.geometry = g;
  mu.masses.assign(g.size(), 0.0);
  mu.masses[7] = 0.25;
  mu.masses[100] = 0.75;
  mu.clipped_mass = 0.125;
  mu.raw_total = 0.9;
  std::stringstream ss;
  write_measure(ss, mu);
  CHECK(ss.str().size() == 4 + 4 + 16 + 32 + 16 + 8 * g.size());
  auto back = read_measure(ss);
  CHECK(back.geometry == g);
  CHECK(back.clipped_mass == 0.125);
  CHECK(back.raw_total == 0.9);
  CHECK(std::memcmp(back.masses.data(), mu.masses.data(), 8 * g.size()) == 0);
  std::stringstream bad("EQMX");
  CHECK_THROWS_AS(read_measure(bad), Error);

  std::ostringstream csv;
  write_measure_csv(csv, mu);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "cell,x1,y1,x2,y2,mass");
  std::getline(lines, line);
  CHECK(line.rfind("7,-1,-1,-1,", 0) == 0);
  CHECK(line.substr(line.rfind(',') + 1) == "0.25");
}
