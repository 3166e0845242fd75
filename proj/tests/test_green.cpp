#include <cstring>
#include <random>
#include <sstream>

#include "doctest.h"
#include "henonlab/green.hpp"

using namespace henon;

namespace {
const HenonMap& square_map() {
  static const HenonMap m = HenonMap::single({0.0, 0.0, 1.0}, 1.0);
  return m;
}

// G+(x, 0) for z^2 with twist 1, iterated in extended precision until the
// remaining tail is far below double resolution.
double extended_precision_green(long double x) {
  long double z = x, w = 0.0L;
  int n = 0;
  while (std::fabs(z) < 1e1000L) {
    long double nz = z * z - w;
    w = z;
    z = nz;
    ++n;
  }
  return static_cast<double>(std::log(std::fabs(z)) / std::pow(2.0L, n));
}
}  // namespace

TEST_CASE("green_point at a bounded orbit") {
  auto g = green_point(square_map(), {0.0, 0.0}, Direction::forward, 1e-10, 100);
  CHECK(g.value == 0.0);
  CHECK(!g.escape_step);
  CHECK(g.error_bound < 1e-25);
  auto c = green_point(square_map(), {0.0, 0.0}, Direction::combined);
  CHECK(c.value == 0.0);
  CHECK(!c.escape_step);
}

TEST_CASE("green_point deep in the filtration region") {
  auto g = green_point(square_map(), {1e8, 0.0}, Direction::forward, 1e-12, 50);
  const double oracle = extended_precision_green(1e8L);
  CHECK(std::abs(g.value - oracle) <= g.error_bound + 1e-14 * oracle);
  CHECK(std::abs(g.value - std::log(1e8)) < 1e-6);
  REQUIRE(g.escape_step);
  CHECK(*g.escape_step == 0);
  // the same point escapes backward too, through z2 = 0 -> z1
  auto b = green_point(square_map(), {1e8, 0.0}, Direction::backward, 1e-12, 50);
  CHECK(b.value > 0.0);
}

TEST_CASE("green_point validates arguments") {
  CHECK_THROWS_AS(green_point(square_map(), {0.0, 0.0}, Direction::forward, 0.0, 10), ConfigError);
  CHECK_THROWS_AS(green_point(square_map(), {0.0, 0.0}, Direction::forward, 1e-8, 0), ConfigError);
}

TEST_CASE("functional equations") {
  const auto f = HenonMap::reference();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.2, 3.2);
  for (int i = 0; i < 100; ++i) {
    Point2C q{{u(rng), u(rng)}, {u(rng), u(rng)}};
    auto a = green_point(f, q, Direction::forward, 1e-8);
    auto b = green_point(f, f.eval_forward(q), Direction::forward, 1e-8);
    CHECK(std::abs(b.value - 2.0 * a.value) <= b.error_bound + 2.0 * a.error_bound + 1e-13 * b.value);
    auto am = green_point(f, q, Direction::backward, 1e-8);
    auto bm = green_point(f, f.eval_backward(q), Direction::backward, 1e-8);
    CHECK(std::abs(bm.value - 2.0 * am.value) <= bm.error_bound + 2.0 * am.error_bound + 1e-13 * bm.value);
    CHECK(a.value >= 0.0);
    CHECK(am.value >= 0.0);
  }
}

TEST_CASE("two-factor map: functional equation and value scale") {
  auto f = compose(HenonMap::reference(), HenonMap::single({0.1, 0.0, 0.0, 1.0}, cplx(0.5, 0.2)));
  CHECK(f.degree() == 6);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    Point2C q{{u(rng), u(rng)}, {u(rng), u(rng)}};
    auto a = green_point(f, q, Direction::forward, 1e-9);
    auto b = green_point(f, f.eval_forward(q), Direction::forward, 1e-9);
    CHECK(std::abs(b.value - 6.0 * a.value) <= b.error_bound + 6.0 * a.error_bound + 1e-12 * b.value);
  }
}

TEST_CASE("potential pullback") {
  CHECK(green_potential_pullback(square_map(), {0.0, 0.0}, 0) == 0.0);
  CHECK(green_potential_pullback(square_map(), {0.0, 0.0}, 17) == 0.0);
  const auto f = HenonMap::reference();
  // huge orbit values are handled on a log scale
  Point2C q{3.5, 0.1};
  const double target = green_point(f, q, Direction::forward, 1e-13).value;
  for (int n : {20, 60, 200}) CHECK(std::abs(green_potential_pullback(f, q, n) - target) < 1e-12);
  // geometric convergence once the orbit is large
  double prev = std::abs(green_potential_pullback(f, q, 3) - target);
  for (int n = 4; n <= 7; ++n) {
    double e = std::abs(green_potential_pullback(f, q, n) - target);
    CHECK(e <= prev);
    prev = e;
  }
}

TEST_CASE("grid geometry") {
  auto g = GridGeometry::cube(3.0, 9);
  CHECK(g.size() == 6561);
  CHECK(g.spacing(0) == 0.75);
  CHECK(g.coord(0, 4) == 0.0);
  for (std::size_t i : {std::size_t{0}, std::size_t{1234}, g.size() - 1}) CHECK(g.ravel(g.unravel(i)) == i);
  CHECK(g.stride(3) == 1);
  CHECK(g.stride(0) == 729);
  auto p = g.point(Index4{0, 1, 2, 8});
  CHECK(p.z1 == cplx(-3.0, -2.25));
  CHECK(p.z2 == cplx(-1.5, 3.0));
  CHECK(g.boundary_distance({4, 4, 4, 4}) == 4);
  CHECK(g.boundary_distance({4, 7, 4, 4}) == 1);
  CHECK(*g.nearest_node(p) == g.ravel({0, 1, 2, 8}));
  CHECK(!g.nearest_node({4.0, 0.0}));
  CHECK_THROWS_AS(GridGeometry::cube(3.0, 7).validate(), ConfigError);
}

TEST_CASE("build_field") {
  auto g = GridGeometry::cube(3.0, 9);
  auto f = build_field(square_map(), g, Direction::combined, 1e-10);
  CHECK(f.at({4, 4, 4, 4}) == 0.0);
  CHECK(f.min() == 0.0);
  for (double v : f.values) CHECK(v >= 0.0);

  // reference map: the fixed point (-1.25, -1.25) is a node, G+ vanishes there
  auto gr = GridGeometry::cube(3.75, 13);
  auto fr = build_field(HenonMap::reference(), gr, Direction::forward, 1e-10);
  CHECK(fr.at({4, 6, 4, 6}) == 0.0);
  CHECK(fr.min() == 0.0);

  // nodes shared between resolutions carry identical values
  auto fine = build_field(square_map(), GridGeometry::cube(3.0, 17), Direction::combined, 1e-10);
  for (std::uint32_t i = 0; i < 9; i += 2)
    for (std::uint32_t j = 0; j < 9; j += 3) CHECK(f.at({i, j, 8 - i, j}) == fine.at({2 * i, 2 * j, 16 - 2 * i, 2 * j}));

  CHECK_THROWS_AS(build_field(square_map(), GridGeometry::cube(2.5, 9), Direction::forward, 1e-10), ConfigError);
  BuildLimits small;
  small.max_nodes = 100;
  CHECK_THROWS_AS(build_field(square_map(), g, Direction::forward, 1e-10, small), ResourceLimitError);
}

TEST_CASE("mollifier kernel") {
  auto k = MollifierKernel::make(2.0, {1.0, 1.0, 1.0, 1.0});
  CHECK(k.taps.size() == 65);
  CHECK(k.reach == 1);
  double s = 0;
  for (auto& t : k.taps) s += t.weight;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(MollifierKernel::make(0.5, {1.0, 1.0, 1.0, 1.0}).taps.size() == 1);
}

TEST_CASE("mollify") {
  auto g = GridGeometry::cube(3.2, 17);
  auto f = build_field(HenonMap::reference(), g, Direction::combined, 1e-10);
  auto same = mollify(f, 0.0);
  CHECK(same.values == f.values);
  CHECK(same.raw());

  GreenField c = f;
  std::fill(c.values.begin(), c.values.end(), 2.5);
  for (double v : mollify(c, 2 * g.spacing(0)).values) CHECK(v == doctest::Approx(2.5).epsilon(1e-14));

  CHECK_THROWS_AS(mollify(f, 1.7), ConfigError);
  CHECK_THROWS_AS(mollify(mollify(f, 0.8), 0.8), ConfigError);

  // near the saddle fixed point (-1.25, -1.25) averages shrink with the radius
  auto gf = GridGeometry::cube(3.75, 25);
  auto ff = build_field(HenonMap::reference(), gf, Direction::combined, 1e-10);
  const double h = gf.spacing(0);
  auto m4 = mollify(ff, 4 * h), m2 = mollify(ff, 2 * h), m1 = mollify(ff, h);
  for (Index4 ix : {Index4{8, 12, 8, 12}, Index4{9, 12, 8, 12}, Index4{8, 11, 8, 12}}) {
    CHECK(m4.at(ix) > m2.at(ix));
    CHECK(m2.at(ix) > m1.at(ix));
    CHECK(m1.at(ix) == ff.at(ix));
  }
  auto m2c = mollify(f, 2 * g.spacing(0));
  CHECK(m2c.contamination_margin() == 1);
}

TEST_CASE("pointwise mollified evaluation agrees with the grid") {
  auto g = GridGeometry::cube(3.2, 17);
  const auto map = HenonMap::reference();
  auto f = build_field(map, g, Direction::combined, 1e-12);
  auto m = mollify(f, 2 * g.spacing(0));
  MollifiedGreen pw(map, MollifierKernel::make(2 * g.spacing(0), {g.spacing(0), g.spacing(1), g.spacing(2), g.spacing(3)}),
                    Direction::combined, 1e-12);
  for (Index4 ix : {Index4{8, 8, 8, 8}, Index4{3, 12, 5, 9}, Index4{1, 1, 15, 15}})
    CHECK(pw(g.point(ix)) == doctest::Approx(m.at(ix)).epsilon(1e-10));
}

TEST_CASE("sublevel thresholds") {
  auto g = GridGeometry::cube(8.0, 20);
  const auto map = HenonMap::reference();
  auto raw = build_field(map, g, Direction::combined, 1e-9);
  auto lam = mollify(raw, 2 * g.spacing(0));
  CHECK_THROWS_AS(sublevel_thresholds(raw, lam, raw.max() + 1.0), NumericError);
  CHECK_THROWS_AS(sublevel_thresholds(raw, lam, -1.0), ConfigError);
  CHECK_THROWS_AS(sublevel_thresholds(lam, raw, 1.0), ConfigError);

  const double delta = default_delta(raw);
  auto t = sublevel_thresholds(raw, lam, delta);
  CHECK(t.kappa1 < t.kappa2);
  CHECK(t.kappa2 < t.kappa_cut);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (raw.values[i] < delta) CHECK(lam.values[i] < t.kappa1);
    if (lam.values[i] < t.kappa_cut) CHECK(g.boundary_distance(g.unravel(i)) >= 2);
  }
  auto smaller = sublevel_thresholds(raw, lam, 0.5 * (delta + raw.min()));
  CHECK(smaller.kappa1 <= t.kappa1);
}

TEST_CASE("GRNF round trip") {
  auto g = GridGeometry::cube(3.0, 9);
  auto f = mollify(build_field(square_map(), g, Direction::backward, 1e-10), 1.0);
  std::stringstream ss;
  write_field(ss, f);
  const std::string bytes = ss.str();
  CHECK(bytes.size() == 4 + 4 + 1 + 16 + 32 + 16 + 8 * g.size());
  CHECK(bytes.substr(0, 4) == "GRNF");
  auto back = read_field(ss);
  CHECK(back.geometry == f.geometry);
  CHECK(back.direction == Direction::backward);
  CHECK(back.mollification_radius == 1.0);
  CHECK(std::memcmp(back.values.data(), f.values.data(), 8 * g.size()) == 0);

  std::stringstream bad("GRNX....");
  CHECK_THROWS_AS(read_field(bad), Error);
  std::stringstream cut(bytes.substr(0, 100));
  CHECK_THROWS_AS(read_field(cut), Error);
}
