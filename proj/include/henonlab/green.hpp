#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "henonlab/grid.hpp"
#include "henonlab/map.hpp"

namespace henon {

/// Pointwise Green function value with a certified error bound.
struct GreenValue {
  double value = 0.0;
  double error_bound = 0.0;
  /// Full-map iteration at which the orbit entered the filtration region;
  /// empty when it never did within the working depth.
  std::optional<int> escape_step;
};

/// G+ (forward), G- (backward) or G = max(G+, G-) (combined) at q.
/// After the orbit enters the filtration region the remaining series is
/// bounded geometrically and iteration stops once that bound drops below tol.
/// Orbits that never enter within n_max iterations get value 0 and the bound
/// d^{-n_max} times an explicit upper bound for G at the last orbit point.
GreenValue green_point(const HenonMap& map, const Point2C& q, Direction dir, double tol = 1e-10,
                       int n_max = 200);

/// d^{-n} * 1/2 log(1 + |f^n(q)|^2) for the forward direction (backward uses
/// f^{-n}). Huge orbit points are tracked on a log scale.
double green_potential_pullback(const HenonMap& map, const Point2C& q, int n,
                                Direction dir = Direction::forward);

/// Normalised polynomial bump (1 - r^2/rho^2)^2 sampled on the lattice
/// offsets of a grid with the given spacings.
struct MollifierKernel {
  struct Tap {
    std::array<int, 4> offset;
    double weight;
  };
  double radius = 0.0;
  std::array<double, 4> spacing{};
  std::vector<Tap> taps;  ///< weights sum to 1
  int reach = 0;          ///< max |offset| over taps and axes

  static MollifierKernel make(double radius, const std::array<double, 4>& spacing);
};

/// Values of a Green function on a grid, raw or mollified.
struct GreenField {
  GridGeometry geometry;
  Direction direction = Direction::forward;
  double mollification_radius = 0.0;
  double tol = 0.0;
  std::vector<double> values;

  double at(const Index4& ix) const { return values[geometry.ravel(ix)]; }
  bool raw() const { return mollification_radius == 0.0; }
  /// Nodes within this distance of the box boundary saw a truncated kernel.
  int contamination_margin() const;
  /// Multilinear interpolation; empty outside the box.
  std::optional<double> interpolate(const Point2C& q) const;
  double min() const;
  double max() const;
};

struct BuildLimits {
  std::size_t max_nodes = std::size_t{1} << 28;
  double max_seconds = 0.0;  ///< 0 = unlimited
  int n_max = 200;
};

/// Raised when build_field exceeds its limits; carries the work completed.
class ResourceLimitError : public Error {
 public:
  ResourceLimitError(const std::string& what, std::size_t done, std::size_t total)
      : Error(what), done_(done), total_(total) {}
  std::size_t nodes_done() const { return done_; }
  std::size_t nodes_total() const { return total_; }

 private:
  std::size_t done_, total_;
};

/// Tabulates green_point over the grid (parallel over chunks of nodes).
GreenField build_field(const HenonMap& map, const GridGeometry& geometry, Direction dir, double tol,
                       const BuildLimits& limits = {});

/// Pointwise max of a G+ field and a G- field on the same grid.
GreenField combine(const GreenField& plus, const GreenField& minus);

/// Discrete convolution with MollifierKernel::make(radius, spacing). Near
/// the boundary the kernel is renormalised over the nodes that exist.
GreenField mollify(const GreenField& field, double radius);

/// Off-grid evaluation of a mollified Green function: the kernel-weighted
/// average of exact Green values at the translated points q + offset. Each
/// translate is p.s.h., so the average is too, and at interior grid nodes
/// it agrees with mollify() up to the Green tolerance.
class MollifiedGreen {
 public:
  MollifiedGreen(HenonMap map, MollifierKernel kernel, Direction dir = Direction::combined,
                 double tol = 1e-9, int n_max = 200);
  double operator()(const Point2C& q) const;
  const MollifierKernel& kernel() const { return kernel_; }

 private:
  HenonMap map_;
  MollifierKernel kernel_;
  Direction dir_;
  double tol_;
  int n_max_;
};

/// Levels with {G < delta} in {G_l < kappa1} in {G_l < kappa2} in
/// {G_l < kappa_cut}, where the last set keeps a one-node margin from the
/// two outer node layers of the box.
struct SublevelThresholds {
  double delta = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double kappa_cut = 0.0;
  std::size_t delta_nodes = 0;  ///< nodes with G < delta
};

/// `split` places kappa2 at kappa1 + split * (kappa_cut - kappa1).
SublevelThresholds sublevel_thresholds(const GreenField& raw, const GreenField& mollified, double delta,
                                       double split = 0.5);

/// Default delta: midway between the interior minimum of G and its minimum
/// over the outer node layer, so that delta < min over the boundary of G.
double default_delta(const GreenField& raw);

/// Binary cache ("GRNF", little-endian). Round trips are bit-exact.
void write_field(std::ostream& os, const GreenField& f);
GreenField read_field(std::istream& is);
void save_field(const std::string& path, const GreenField& f);
GreenField load_field(const std::string& path);

}  // namespace henon
