#include <random>

#include "doctest.h"
#include "henonlab/map.hpp"

using namespace henon;

namespace {
double rel_err(const Point2C& a, const Point2C& b) { return (a - b).norm() / std::max(1.0, b.norm()); }
}  // namespace

TEST_CASE("forward and backward evaluation examples") {
  auto sq = HenonMap::single({0.0, 0.0, 1.0}, 1.0);
  CHECK(sq.eval_forward({0.0, 0.0}) == Point2C{0.0, 0.0});
  CHECK(sq.eval_forward({1.0, 1.0}) == Point2C{0.0, 1.0});
  CHECK(sq.eval_backward({0.0, 0.0}) == Point2C{0.0, 0.0});

  auto m = HenonMap::single({0.3, 0.0, 1.0}, 0.15);
  auto y = m.eval_forward({1.0, 1.0});
  CHECK(y.z1.real() == doctest::Approx(1.15));
  CHECK(y.z2.real() == doctest::Approx(1.0));
  CHECK(rel_err(m.eval_backward({1.15, 1.0}), {1.0, 1.0}) < 1e-12);
}

TEST_CASE("round trip at random points") {
  auto m = HenonMap::reference();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    Point2C q{{u(rng), u(rng)}, {u(rng), u(rng)}};
    CHECK(rel_err(m.eval_backward(m.eval_forward(q)), q) < 1e-9);
    CHECK(rel_err(m.eval_forward(m.eval_backward(q)), q) < 1e-9);
  }
}

TEST_CASE("factor validation") {
  CHECK_THROWS_AS(HenonMap::single({1.0, 1.0}, 1.0), ConfigError);
  CHECK_THROWS_AS(HenonMap::single({0.0, 0.0, 1.0}, 0.0), ConfigError);
  CHECK_THROWS_AS(HenonMap({}), ConfigError);
}

TEST_CASE("composition") {
  auto a = HenonMap::reference();
  auto b = HenonMap::single({0.2, 0.1, 1.0}, cplx(0.3, 0.1));
  auto ab = compose(a, b);
  CHECK(ab.degree() == 4);
  CHECK(ab.factors().size() == 2);
  CHECK(compose(a, a).factors().size() == 2);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 100; ++i) {
    Point2C q{{u(rng), u(rng)}, {u(rng), u(rng)}};
    CHECK(rel_err(ab.eval_forward(q), a.eval_forward(b.eval_forward(q))) < 1e-9);
    CHECK(rel_err(ab.eval_backward(q), b.eval_backward(a.eval_backward(q))) < 1e-9);
  }
}

TEST_CASE("filtration radius from the coefficient inequality") {
  // |z|^2 - |delta||z| >= 2|z|  <=>  |z| >= 2 + |delta|
  CHECK(HenonMap::single({0.0, 0.0, 1.0}, 1.0).filtration_radius() == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(HenonMap::single({0.0, 0.0, 1.0}, 0.15).filtration_radius() == doctest::Approx(2.15).epsilon(1e-12));
  // z^2 - 3: r^2 - 2.15 r - 3 = 0
  const double r = (2.15 + std::sqrt(2.15 * 2.15 + 12.0)) / 2.0;
  CHECK(HenonMap::reference().filtration_radius() == doctest::Approx(r).epsilon(1e-12));
  // backward: q = p / 0.15, coupling 1/0.15
  const double c = 1.0 / 0.15;
  const double rb = ((c + 2.0) + std::sqrt((c + 2.0) * (c + 2.0) + 4.0 * c * 3.0 * c)) / (2.0 * c);
  CHECK(HenonMap::reference().backward_filtration_radius() == doctest::Approx(std::max(2.0, rb)).epsilon(1e-12));
}

TEST_CASE("filtration region is forward invariant with doubling") {
  for (auto m : {HenonMap::reference(), HenonMap::single({0.0, 0.0, 1.0}, 1.0),
                 HenonMap::single({cplx(0.2, 0.4), 1.0, 0.0, 1.0}, cplx(0.5, -0.2))}) {
    const double R = m.filtration_radius();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int bad = 0;
    for (int i = 0; i < 10000; ++i) {
      const double r1 = R * (1.0 + 3.0 * u(rng));
      const double r2 = r1 * u(rng);
      Point2C q{std::polar(r1, 6.283 * u(rng)), std::polar(r2, 6.283 * u(rng))};
      auto y = m.eval_forward(q);
      if (!(std::abs(y.z1) >= 2.0 * std::abs(q.z1) * (1 - 1e-12) && std::abs(y.z1) >= std::abs(y.z2))) ++bad;
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("iterate") {
  auto sq = HenonMap::single({0.0, 0.0, 1.0}, 1.0);
  auto fixed = iterate(sq, {0.0, 0.0}, 25, 3.0);
  CHECK(fixed.survived());
  CHECK(fixed.orbit.size() == 26);

  auto out = iterate(sq, {10.0, 0.0}, 5, 3.0);
  REQUIRE(out.exit_step);
  CHECK(*out.exit_step <= 1);

  // Probes approaching the saddle fixed point (-1.25, -1.25) of the
  // reference map escape later: exit step grows linearly in log(1/t).
  auto m = HenonMap::reference();
  double sk = 0, se = 0, skk = 0, ske = 0;
  const int K = 14;
  for (int k = 1; k <= K; ++k) {
    const double t = std::pow(10.0, -k);
    auto o = iterate(m, {-1.25 + t, -1.25 + t}, 200, 10.0);
    REQUIRE(o.exit_step);
    sk += k;
    se += *o.exit_step;
    skk += k * k;
    ske += k * *o.exit_step;
  }
  const double slope = (K * ske - sk * se) / (K * skk - sk * sk);
  CHECK(slope > 1.5);

  CHECK_THROWS_AS(iterate(sq, {0.0, 0.0}, -1, 3.0), ConfigError);
  CHECK(iterate(sq, {0.0, 0.0}, 30, 3.0, Direction::backward).survived());
}

TEST_CASE("overflow is reported with the step") {
  auto sq = HenonMap::single({0.0, 0.0, 1.0}, 1.0);
  Point2C q{1e200, 0.0};
  CHECK_THROWS_AS(sq.eval_forward(q), EscapedToInfinity);
  try {
    sq.eval_forward(q);
  } catch (const EscapedToInfinity& e) {
    CHECK(e.step() == 0);
    CHECK(e.last_finite() == q);
  }
}
