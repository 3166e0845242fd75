#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "henonlab/green.hpp"

namespace henon {

/// Lower and upper bound of an observable over a centred box.
struct Bounds {
  double lo = -INFINITY;
  double hi = INFINITY;
};

/// Where an observable is known to be plurisubharmonic.
struct PshRegion {
  enum class Kind { none, everywhere, box, sublevel } kind = Kind::none;
  std::array<double, 4> radii{};  ///< box
  double level = 0.0;             ///< sublevel {g < level}
  std::shared_ptr<const std::function<double(const Point2C&)>> g;

  bool contains(const Point2C& q) const;
};

/// A real function on C^2 with metadata. Immutable value object.
struct Observable {
  std::function<double(const Point2C&)> eval;
  PshRegion psh;
  double lower = -INFINITY;
  double upper = INFINITY;
  std::string label;
  std::vector<Point2C> singular;
  /// Bounds over the box prod [-r_a, r_a]; defaults to (lower, upper).
  std::function<Bounds(const std::array<double, 4>&)> box_bounds;

  double operator()(const Point2C& q) const { return eval(q); }
  Bounds bounds_on(const std::array<double, 4>& radii) const;
};

Observable make_log_distance(const Point2C& a);
Observable make_coord_sq();  ///< |z1|^2 + |z2|^2
Observable make_re_z1();
Observable make_constant(double c);
/// max(obs, -M).
Observable truncate(const Observable& obs, double M);
/// a * obs (a > 0 keeps plurisubharmonicity).
Observable scale(const Observable& obs, double a);

/// chi(g): 1 for g <= k2, 1 - (6t^5 - 15t^4 + 10t^3) with t = (g - k2)/(k3 - k2)
/// on [k2, k3], 0 beyond.
double cutoff(double g, double k2, double k3);
/// sup |chi'| and sup |chi''| in terms of g.
std::pair<double, double> cutoff_derivative_bounds(double k2, double k3);

/// What extend() needs to know about G_l.
struct ExtensionContext {
  std::shared_ptr<const std::function<double(const Point2C&)>> g_lambda;
  GridGeometry box;  ///< extension is 0 outside this box
  SublevelThresholds kappas;
};

struct ExtensionInfo {
  double shift = 0.0;  ///< s with obs + s >= 0 on the box
  double sup = 0.0;    ///< L = sup (obs + s) on the box
  double kappa1 = 0.0, kappa2 = 0.0, kappa3 = 0.0;
  double chi_d1 = 0.0, chi_d2 = 0.0;
  /// sup |extension| / sup |obs| is at most this.
  double ratio_bound() const;
};

/// chi(G_l) * (max(obs + s, tau) - s) with tau = L (G_l - kappa1)/(kappa2 - kappa1).
/// Equals obs exactly where G_l < kappa1; the cutoff runs from kappa2 to kappa_cut.
Observable extend(const Observable& obs, const ExtensionContext& ctx, ExtensionInfo* info = nullptr);

/// Per sample the difference Hessian H is diagonalised, then the Levi form is
/// re-measured along each eigenvector v with the directional stencil
/// (u(x+-hv) + u(x+-ihv) - 4u(x)) / (4h^2). For smooth u both agree to O(h^2);
/// at convex kinks (max, truncation) the cross stencils of H can turn
/// indefinite while the directional values stay nonnegative, so the
/// directional minimum is the one compared with tol.
struct LeviReport {
  std::size_t samples = 0;
  double min_eigenvalue = INFINITY;         ///< directional minimum
  double min_matrix_eigenvalue = INFINITY;  ///< smallest eigenvalue of H itself
  double fraction = 0.0;  ///< share of samples with min eigenvalue >= -tol
  double h = 0.0;
  std::size_t resampled = 0;  ///< draws rejected at the singular locus
};

/// Region to sample for levi_check: uniform in the box, filtered by `keep`.
struct SampleRegion {
  std::vector<double> radii;  ///< one per real coordinate (4 or 8)
  std::function<bool(const std::vector<double>&)> keep;
  double diameter() const;
};

/// Hermitian matrix (d^2 u / dz_j dzbar_k) by central differences of step h
/// at a point of C^n, n = x.size()/2, real coordinates (x1, y1, x2, y2, ...).
std::vector<cplx> levi_matrix(const std::function<double(const std::vector<double>&)>& u, const std::vector<double>& x,
                              double h);
/// Smallest eigenvalue of an n x n Hermitian matrix (row-major): closed form
/// for n <= 2, cyclic Jacobi on the real 2n x 2n embedding otherwise.
double min_hermitian_eigenvalue(const std::vector<cplx>& m, int n);
std::vector<double> hermitian_eigenvalues(const std::vector<cplx>& m, int n);

struct HermitianEigen {
  std::vector<double> values;             ///< ascending
  std::vector<std::vector<cplx>> vectors; ///< unit eigenvectors, same order
};
HermitianEigen hermitian_eigen(const std::vector<cplx>& m, int n);

/// Levi form of u at x along the complex direction v by the directional stencil.
double directional_levi(const std::function<double(const std::vector<double>&)>& u, const std::vector<double>& x,
                        const std::vector<cplx>& v, double h);

/// h <= 0 picks 1e-3 times the region diameter.
LeviReport levi_check(const std::function<double(const std::vector<double>&)>& u, const SampleRegion& region,
                      std::size_t samples, double h, double tol, std::uint64_t seed = 1);
LeviReport levi_check(const Observable& obs, const SampleRegion& region, std::size_t samples, double h, double tol,
                      std::uint64_t seed = 1);

/// Builds an observable from a catalog label: "log_dist:x1,y1,x2,y2",
/// "trunc:M:<inner>", "ext:<inner>" (needs ctx), "coord_sq", "re_z1", "const:c".
Observable parse_observable(const std::string& label, const ExtensionContext* ctx = nullptr);

}  // namespace henon
