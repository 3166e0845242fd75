#include "henonlab/grid.hpp"

#include <cmath>

namespace henon {

std::size_t GridGeometry::size() const {
  std::size_t n = 1;
  for (auto r : resolution) n *= r;
  return n;
}

double GridGeometry::cell_volume() const {
  return spacing(0) * spacing(1) * spacing(2) * spacing(3);
}

std::size_t GridGeometry::stride(int axis) const {
  std::size_t s = 1;
  for (int a = 3; a > axis; --a) s *= resolution[a];
  return s;
}

Index4 GridGeometry::unravel(std::size_t idx) const {
  Index4 ix{};
  for (int a = 3; a >= 0; --a) {
    ix[a] = static_cast<std::uint32_t>(idx % resolution[a]);
    idx /= resolution[a];
  }
  return ix;
}

std::size_t GridGeometry::ravel(const Index4& ix) const {
  std::size_t idx = 0;
  for (int a = 0; a < 4; ++a) idx = idx * resolution[a] + ix[a];
  return idx;
}

Point2C GridGeometry::point(const Index4& ix) const {
  return Point2C::from_real4({coord(0, ix[0]), coord(1, ix[1]), coord(2, ix[2]), coord(3, ix[3])});
}

Point2C GridGeometry::point(std::size_t idx) const { return point(unravel(idx)); }

std::uint32_t GridGeometry::boundary_distance(const Index4& ix) const {
  std::uint32_t d = ix[0];
  for (int a = 0; a < 4; ++a) d = std::min({d, ix[a], resolution[a] - 1 - ix[a]});
  return d;
}

bool GridGeometry::contains(const Point2C& q) const {
  auto x = q.real4();
  for (int a = 0; a < 4; ++a)
    if (!(std::abs(x[a]) <= radii[a])) return false;
  return true;
}

std::optional<std::size_t> GridGeometry::nearest_node(const Point2C& q) const {
  if (!contains(q)) return std::nullopt;
  auto x = q.real4();
  Index4 ix{};
  for (int a = 0; a < 4; ++a) {
    double u = std::round((x[a] + radii[a]) / spacing(a));
    ix[a] = static_cast<std::uint32_t>(std::clamp(u, 0.0, double(resolution[a] - 1)));
  }
  return ravel(ix);
}

void GridGeometry::validate() const {
  for (int a = 0; a < 4; ++a) {
    if (!(radii[a] > 0.0) || !std::isfinite(radii[a])) throw ConfigError("grid radius must be positive");
    if (resolution[a] < 8) throw ConfigError("grid resolution must be at least 8 per axis");
  }
}

}  // namespace henon
