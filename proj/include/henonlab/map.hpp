#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "henonlab/types.hpp"

namespace henon {

/// Complex polynomial stored by ascending powers: coeffs[i] multiplies z^i.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<cplx> coeffs);

  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  cplx lead() const { return coeffs_.back(); }
  std::span<const cplx> coeffs() const { return coeffs_; }
  cplx operator()(cplx z) const;
  Polynomial scaled(cplx s) const;

 private:
  std::vector<cplx> coeffs_;
};

/// Generalized Henon factor (z, w) -> (p(z) - twist * w, z).
struct ElementaryFactor {
  Polynomial p;
  cplx twist{1.0};

  /// Validates deg p >= 2, leading coefficient and twist nonzero.
  ElementaryFactor(Polynomial poly, cplx delta);

  Point2C forward(const Point2C& q) const { return {p(q.z1) - twist * q.z2, q.z1}; }
  Point2C backward(const Point2C& q) const { return {q.z2, (p(q.z2) - q.z1) / twist}; }
};

enum class Direction : std::uint8_t { forward = 0, backward = 1, combined = 2 };

std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

/// Raised when an evaluation overflows. `step` counts factor applications
/// completed before the overflow.
class EscapedToInfinity : public Error {
 public:
  EscapedToInfinity(std::size_t step, Point2C last);
  std::size_t step() const { return step_; }
  const Point2C& last_finite() const { return last_; }

 private:
  std::size_t step_;
  Point2C last_;
};

/// One step of a directed factor written in "escape coordinates":
/// (e, o) -> (q(e) - coupling * o, e). Forward factors use (e, o) = (z1, z2),
/// q = p, coupling = twist. Backward factors use (e, o) = (z2, z1),
/// q = p / twist, coupling = 1 / twist.
struct DirectedStep {
  Polynomial q;
  cplx coupling;
  double radius;  ///< filtration radius of this step

  cplx apply(cplx e, cplx o) const { return q(e) - coupling * o; }
};

/// Composition f = factors.back() o ... o factors.front(); factors are
/// applied left to right. Immutable after construction.
class HenonMap {
 public:
  explicit HenonMap(std::vector<ElementaryFactor> factors);

  /// Single factor convenience: p given by ascending coefficients.
  static HenonMap single(std::vector<cplx> coeffs, cplx twist);
  /// p(z) = z^2 - 3, twist 0.15.
  static HenonMap reference();

  std::span<const ElementaryFactor> factors() const { return factors_; }
  long long degree() const { return degree_; }

  Point2C eval_forward(const Point2C& q) const;
  Point2C eval_backward(const Point2C& q) const;
  Point2C eval(const Point2C& q, Direction dir) const;
  /// n-fold iterate in the given direction (forward or backward).
  Point2C iterate_n(const Point2C& q, int n, Direction dir) const;

  /// Steps in escape coordinates, in application order for `dir`.
  const std::vector<DirectedStep>& steps(Direction dir) const;

  /// Smallest R >= 2 such that |z1| >= max(R, |z2|) forces |z1| to at least
  /// double under every forward factor.
  double filtration_radius() const { return fwd_radius_; }
  /// Same for the backward region |z2| >= max(R, |z1|).
  double backward_filtration_radius() const { return bwd_radius_; }
  double filtration_radius(Direction dir) const;

 private:
  std::vector<ElementaryFactor> factors_;
  std::vector<DirectedStep> fwd_steps_;
  std::vector<DirectedStep> bwd_steps_;
  long long degree_ = 1;
  double fwd_radius_ = 2.0;
  double bwd_radius_ = 2.0;
};

/// a o b: evaluation applies b first.
HenonMap compose(const HenonMap& a, const HenonMap& b);

/// Outcome of a bounded-orbit test.
struct OrbitOutcome {
  std::vector<Point2C> orbit;     ///< q, f(q), ... up to the exit point (inclusive)
  std::optional<int> exit_step;   ///< first k with sup-norm > escape radius
  bool survived() const { return !exit_step.has_value(); }
  const Point2C& last() const { return orbit.back(); }
};

/// Iterates up to n times; stops at the first point whose sup-norm exceeds
/// escape_radius (step 0 is q itself).
OrbitOutcome iterate(const HenonMap& map, const Point2C& q, int n, double escape_radius,
                     Direction dir = Direction::forward);

/// Largest positive root of lead*r^d - sum_{i<d} |a_i| r^i - slope*r, clamped
/// below by 2. Shared by both filtration radii.
double filtration_bound(const Polynomial& p, double slope);

}  // namespace henon
