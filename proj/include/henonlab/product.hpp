#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>

#include "henonlab/map.hpp"
#include "henonlab/observables.hpp"

namespace henon {

using PointPair = std::pair<Point2C, Point2C>;

/// F(z, w) = (f(z), f^{-1}(w)).
PointPair product_map_eval(const HenonMap& map, const Point2C& z, const Point2C& w);
/// F^{-1}(z, w) = (f^{-1}(z), f(w)).
PointPair product_map_inverse(const HenonMap& map, const Point2C& z, const Point2C& w);
/// F^n; negative n applies the inverse.
PointPair product_map_iterate(const HenonMap& map, const Point2C& z, const Point2C& w, int n);

enum class Sign { plus, minus };

/// phi, psi rescaled to sup <= 1/2 on a box, with
/// phi_j+ = phi^2 + j phi + 6, phi_j- = phi^2 + j phi - 6,
/// psi_l+ = psi^2 + l psi + 6, psi_l- = -psi^2 - l psi + 6.
class TestFunctionFamily {
 public:
  /// `radii` is the half-width of the working box of each factor. Inputs
  /// with sup above 1/2 there are scaled down; the sup is taken from the
  /// observable's box bounds and confirmed on `samples` random points.
  TestFunctionFamily(Observable phi, Observable psi, const std::array<double, 4>& radii, std::size_t samples = 4096,
                     std::uint64_t seed = 1);

  double phi(const Point2C& z) const { return phi_scale_ * phi_(z); }
  double psi(const Point2C& w) const { return psi_scale_ * psi_(w); }
  double phi_scale() const { return phi_scale_; }
  double psi_scale() const { return psi_scale_; }
  const std::array<double, 4>& radii() const { return radii_; }
  std::string label() const { return phi_.label + " x " + psi_.label; }

  static double phi_jl(int j, Sign s, double phi_value);
  static double psi_jl(int l, Sign s, double psi_value);

 private:
  Observable phi_, psi_;
  double phi_scale_ = 1.0, psi_scale_ = 1.0;
  std::array<double, 4> radii_;
};

/// The three stock pairs: (|z|^2, |w|^2), (|z|^2, Re w1) and
/// (max(log|z|, -10), log(1 + |w|^2)), each rescaled onto the box.
std::vector<TestFunctionFamily> builtin_families(const std::array<double, 4>& radii);

/// Phi_jl+(z, w) = phi_j+(z) psi_l+(w), Phi_jl-(z, w) = phi_j-(z) psi_l-(w).
double eval_Phi(const TestFunctionFamily& fam, int j, int l, Sign s, const Point2C& z, const Point2C& w);

struct PhiLeviReport {
  int j, l;
  Sign sign;
  LeviReport report;
};

/// levi_check of all eight Phi on the product box D x D (C^4).
std::vector<PhiLeviReport> levi_check_Phi(const TestFunctionFamily& fam, std::size_t samples, double h, double tol,
                                          std::uint64_t seed = 1);

/// Tables indexed [j-1][l-1].
struct CoefficientSet {
  using Table = std::array<std::array<int, 2>, 2>;
  Table alpha_plus{}, alpha_minus{}, beta_plus{}, beta_minus{};

  static CoefficientSet paper();
  static CoefficientSet zero() { return {}; }
};

/// (sum of all alpha entries, sum of all beta entries).
std::pair<int, int> coefficient_sums(const CoefficientSet& c);

enum class Combination { A, B };

/// sum coeff phi_j(x) psi_l(y) for the alpha (A) or beta (B) tables.
double combination_lhs(const CoefficientSet& c, Combination which, double x, double y);
/// A: xy + 36x^2 + 36y^2 + 48x + 48y; B: the same with -xy.
double combination_rhs(Combination which, double x, double y);
/// |lhs - rhs| / max(|lhs|, |rhs|, 1).
double combination_residual_values(const CoefficientSet& c, Combination which, double x, double y);

struct IdentityResult {
  std::optional<double> residual;  ///< empty when an orbit left the box
  double x = 0.0, y = 0.0;         ///< phi(f^n z), psi(f^-n w)
};

/// Residual of the combination identity at x = phi(f^n z), y = psi(f^{-n} w).
/// Orbits leaving the family's box (or overflowing) are reported as skipped.
IdentityResult combination_identity_residual(const TestFunctionFamily& fam, const CoefficientSet& c, Combination which,
                                             const HenonMap& map, int n, const Point2C& z, const Point2C& w);

std::string to_string(Sign s);

}  // namespace henon
