#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "henonlab/types.hpp"

namespace henon {

using Index4 = std::array<std::uint32_t, 4>;

/// Uniform node grid over the box prod_a [-radii[a], radii[a]] of R^4 = C^2,
/// axes ordered (x1, y1, x2, y2), row-major with y2 fastest. Node i on axis a
/// sits at -r_a + i * 2 r_a / (n_a - 1).
struct GridGeometry {
  std::array<double, 4> radii{};
  Index4 resolution{};

  static GridGeometry cube(double radius, std::uint32_t n) { return {{radius, radius, radius, radius}, {n, n, n, n}}; }

  std::size_t size() const;
  double spacing(int axis) const { return 2.0 * radii[axis] / (resolution[axis] - 1); }
  double coord(int axis, std::uint32_t i) const { return -radii[axis] + i * spacing(axis); }
  double cell_volume() const;
  std::size_t stride(int axis) const;

  Index4 unravel(std::size_t idx) const;
  std::size_t ravel(const Index4& ix) const;
  Point2C point(std::size_t idx) const;
  Point2C point(const Index4& ix) const;
  /// Nodes between this one and the nearest box face, minimised over axes.
  std::uint32_t boundary_distance(const Index4& ix) const;
  bool contains(const Point2C& q) const;
  /// Index of the node whose dual cell contains q, if q lies in the box.
  std::optional<std::size_t> nearest_node(const Point2C& q) const;

  void validate() const;
  bool operator==(const GridGeometry&) const = default;
};

}  // namespace henon
