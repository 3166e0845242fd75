#pragma once

#include <string>
#include <vector>

#include "henonlab/map.hpp"

namespace henon {

/// Outcome of one verification suite. `margin` is how far the worst case
/// sits inside its limit (negative when the suite fails).
struct SuiteResult {
  std::string name;
  bool pass = false;
  double worst = 0.0;
  double margin = 0.0;
  std::string detail;
};

/// max |f^-1(f(q)) - q| / max(|q|, 1) over random q in the cube of `radius`.
SuiteResult suite_round_trip(const HenonMap& map, std::size_t count = 1000, double radius = 3.2,
                             std::uint64_t seed = 1);
/// |G(f q) - d G(q)| against the summed error bounds, both directions.
SuiteResult suite_functional_equation(const HenonMap& map, std::size_t count = 100, double radius = 3.2,
                                      double tol = 1e-8, std::uint64_t seed = 1);
/// Slope of mean log |pullback_n - G+| over n = 2..12 at points of K+.
SuiteResult suite_pullback(const HenonMap& map, std::size_t points = 20, std::uint64_t seed = 1);
/// The A and B identities at random value pairs plus the coefficient sums.
SuiteResult suite_coefficients(std::size_t count = 10000, std::uint64_t seed = 1);
/// Levi check of the eight Phi for every stock pair.
SuiteResult suite_phi_levi(std::size_t samples = 200, double radius = 2.0, std::uint64_t seed = 1);

/// Fixed points of f found by Newton's method from a grid of starts.
std::vector<Point2C> fixed_points(const HenonMap& map, double radius = 3.0);
/// Points of the stable manifolds of the fixed points, inside the cube of `radius`.
std::vector<Point2C> stable_manifold_points(const HenonMap& map, std::size_t count, double radius,
                                            std::uint64_t seed = 1);

}  // namespace henon
