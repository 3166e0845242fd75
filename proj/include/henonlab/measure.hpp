#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "henonlab/green.hpp"
#include "henonlab/rng.hpp"

namespace henon {

/// Coefficient matrix (d^2 u / dz_j dzbar_k) of a real (1,1) form.
struct Hermitian2 {
  double h11 = 0.0;
  double h22 = 0.0;
  cplx h12{};

  static Hermitian2 identity() { return {1.0, 1.0, {}}; }
  double min_eigenvalue() const;
  double max_eigenvalue() const;
};

/// Real second partials in the axis order (x1, y1, x2, y2).
using RealHessian4 = std::array<std::array<double, 4>, 4>;

/// d^2/dz_j dzbar_k = 1/4 [(d_xj d_xk + d_yj d_yk) + i (d_xj d_yk - d_yj d_xk)].
Hermitian2 complex_hessian(const RealHessian4& d);

/// Central second differences of u around a node; `u(o)` returns the value at
/// the node shifted by the integer offset o.
template <class F>
RealHessian4 stencil_hessian(const F& u, const std::array<double, 4>& h) {
  RealHessian4 d{};
  const double c = u(std::array<int, 4>{0, 0, 0, 0});
  for (int a = 0; a < 4; ++a) {
    std::array<int, 4> p{}, m{};
    p[a] = 1;
    m[a] = -1;
    d[a][a] = (u(p) - 2.0 * c + u(m)) / (h[a] * h[a]);
    for (int b = a + 1; b < 4; ++b) {
      std::array<int, 4> pp{}, pm{}, mp{}, mm{};
      pp[a] = pm[a] = 1;
      mp[a] = mm[a] = -1;
      pp[b] = mp[b] = 1;
      pm[b] = mm[b] = -1;
      d[a][b] = d[b][a] = (u(pp) - u(pm) - u(mp) + u(mm)) / (4.0 * h[a] * h[b]);
    }
  }
  return d;
}

/// Discrete complex Hessian of a mollified field at an interior node.
Hermitian2 mixed_hessian(const GreenField& field, const Index4& node);

/// Density of dd^c u ^ dd^c v against Lebesgue volume on R^4:
/// kappa (p11 m22 + p22 m11 - 2 Re(p12 conj(m12))).
double wedge_density(const Hermitian2& hp, const Hermitian2& hm, double kappa);

/// kappa for dd^c = (i/pi) d dbar, where the Fubini-Study self-wedge has mass 1.
inline constexpr double kAnalyticKappa = 0.40528473456935108578;  // 4 / pi^2

struct CalibrationBox {
  double radius;
  std::uint32_t nodes;
  double sum;  ///< sum of density (kappa = 1) times cell volume
};

struct Calibration {
  double spacing = 0.25;
  std::vector<CalibrationBox> boxes;
  double extrapolated_sum = 0.0;  ///< S(R) = S_inf - c / R^2 through the two largest boxes
  double kappa = 0.0;             ///< 1 / S_inf
  /// kappa times the sum on the largest box: the calibration-grid mass.
  double calibration_mass() const { return kappa * boxes.back().sum; }
};

/// Discrete Fubini-Study self-wedge over cubes of the given radii at a fixed
/// spacing, evaluated slab by slab.
double fubini_study_sum(double radius, double spacing);
Calibration calibrate(double spacing = 0.25, const std::vector<double>& radii = {6.0, 9.0, 12.0});

/// Nonnegative masses on the dual cells of grid nodes.
struct DiscreteMeasure {
  GridGeometry geometry;
  std::vector<double> masses;
  double clipped_mass = 0.0;  ///< negative mass removed before normalisation
  double raw_total = 0.0;     ///< signed total before clipping and normalisation

  /// clipped_mass over the total variation of the pre-clip masses.
  double clipped_fraction() const;
  /// Indices of cells with positive mass, ascending.
  std::vector<std::size_t> support() const;
  Point2C center(std::size_t cell) const { return geometry.point(cell); }
};

struct MeasureOptions {
  double kappa = kAnalyticKappa;
  double clip_ceiling = 0.05;
  /// Cells closer than this many nodes to the boundary are dropped; -1 means
  /// kernel reach + 2, so no Hessian stencil touches a node whose kernel was
  /// truncated by the box.
  int margin = -1;
};

/// kappa dd^c G+_l ^ dd^c G-_l per cell, clipped at zero and normalised.
DiscreteMeasure build_measure(const GreenField& plus, const GreenField& minus, const MeasureOptions& opt = {});

/// Draws cells by mass (alias method) and jitters uniformly within the cell.
std::vector<Point2C> sample(const DiscreteMeasure& mu, std::size_t count, std::uint64_t seed);

struct IntegralReport {
  double value = 0.0;
  std::size_t floored = 0;  ///< centres where obs was -inf or NaN
};

/// Midpoint rule sum_c m_c obs(center_c); non-finite values below are
/// replaced by `floor`.
IntegralReport integrate(const DiscreteMeasure& mu, const std::function<double(const Point2C&)>& obs,
                         double floor = -50.0);

/// sum_c m_c field(node_c) for a field on the same grid.
double integrate_field(const DiscreteMeasure& mu, const GreenField& field);

/// Binary cache ("EQMS", little-endian).
void write_measure(std::ostream& os, const DiscreteMeasure& mu);
DiscreteMeasure read_measure(std::istream& is);
void save_measure(const std::string& path, const DiscreteMeasure& mu);
DiscreteMeasure load_measure(const std::string& path);
/// One row per cell of positive mass: cell,x1,y1,x2,y2,mass.
void write_measure_csv(std::ostream& os, const DiscreteMeasure& mu);

/// Neumaier-compensated sum.
double compensated_sum(const std::vector<double>& v);

}  // namespace henon
