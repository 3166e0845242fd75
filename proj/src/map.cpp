#include "henonlab/map.hpp"

#include <cmath>
#include <sstream>

namespace henon {

Polynomial::Polynomial(std::vector<cplx> coeffs) : coeffs_(std::move(coeffs)) {
  while (coeffs_.size() > 1 && coeffs_.back() == cplx{}) coeffs_.pop_back();
  if (coeffs_.empty()) coeffs_.push_back({});
}

cplx Polynomial::operator()(cplx z) const {
  cplx acc = coeffs_.back();
  for (auto it = coeffs_.rbegin() + 1; it != coeffs_.rend(); ++it) acc = acc * z + *it;
  return acc;
}

Polynomial Polynomial::scaled(cplx s) const {
  std::vector<cplx> c(coeffs_);
  for (auto& a : c) a *= s;
  return Polynomial(std::move(c));
}

ElementaryFactor::ElementaryFactor(Polynomial poly, cplx delta) : p(std::move(poly)), twist(delta) {
  if (p.degree() < 2) throw ConfigError("elementary factor needs deg p >= 2");
  if (p.lead() == cplx{}) throw ConfigError("leading coefficient must be nonzero");
  if (twist == cplx{}) throw ConfigError("twist must be nonzero");
}

std::string to_string(Direction d) {
  switch (d) {
    case Direction::forward: return "forward";
    case Direction::backward: return "backward";
    case Direction::combined: return "combined";
  }
  return "?";
}

Direction direction_from_string(const std::string& s) {
  if (s == "forward" || s == "+") return Direction::forward;
  if (s == "backward" || s == "-") return Direction::backward;
  if (s == "combined" || s == "max") return Direction::combined;
  throw ConfigError("unknown direction '" + s + "'");
}

namespace {
std::string describe(std::size_t step) {
  std::ostringstream os;
  os << "orbit escaped to infinity at factor step " << step;
  return os.str();
}
}  // namespace

EscapedToInfinity::EscapedToInfinity(std::size_t step, Point2C last)
    : Error(describe(step)), step_(step), last_(last) {}

double filtration_bound(const Polynomial& p, double slope) {
  const int d = p.degree();
  const double lead = std::abs(p.lead());
  auto g = [&](double r) {
    double v = lead * std::pow(r, d) - slope * r;
    for (int i = 0; i < d; ++i) v -= std::abs(p.coeffs()[i]) * std::pow(r, i);
    return v;
  };
  // Coefficient signs change once, so g has a single positive root.
  double hi = 1.0;
  while (g(hi) < 0) hi *= 2;
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (g(mid) < 0 ? lo : hi) = mid;
  }
  return std::max(2.0, hi);
}

HenonMap::HenonMap(std::vector<ElementaryFactor> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw ConfigError("a Henon map needs at least one factor");
  for (const auto& f : factors_) {
    degree_ *= f.p.degree();
    DirectedStep fs{f.p, f.twist, 0.0};
    fs.radius = filtration_bound(fs.q, std::abs(fs.coupling) + 2.0);
    DirectedStep bs{f.p.scaled(1.0 / f.twist), 1.0 / f.twist, 0.0};
    bs.radius = filtration_bound(bs.q, std::abs(bs.coupling) + 2.0);
    fwd_radius_ = std::max(fwd_radius_, fs.radius);
    bwd_radius_ = std::max(bwd_radius_, bs.radius);
    fwd_steps_.push_back(std::move(fs));
    bwd_steps_.insert(bwd_steps_.begin(), std::move(bs));
  }
}

HenonMap HenonMap::single(std::vector<cplx> coeffs, cplx twist) {
  return HenonMap({ElementaryFactor(Polynomial(std::move(coeffs)), twist)});
}

HenonMap HenonMap::reference() { return single({-3.0, 0.0, 1.0}, 0.15); }

Point2C HenonMap::eval_forward(const Point2C& q) const {
  Point2C cur = q;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    Point2C next = factors_[i].forward(cur);
    if (!next.finite()) throw EscapedToInfinity(i, cur);
    cur = next;
  }
  return cur;
}

Point2C HenonMap::eval_backward(const Point2C& q) const {
  Point2C cur = q;
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    Point2C next = factors_[factors_.size() - 1 - k].backward(cur);
    if (!next.finite()) throw EscapedToInfinity(k, cur);
    cur = next;
  }
  return cur;
}

Point2C HenonMap::eval(const Point2C& q, Direction dir) const {
  if (dir == Direction::combined) throw ConfigError("eval needs forward or backward");
  return dir == Direction::forward ? eval_forward(q) : eval_backward(q);
}

Point2C HenonMap::iterate_n(const Point2C& q, int n, Direction dir) const {
  Point2C cur = q;
  for (int i = 0; i < n; ++i) cur = eval(cur, dir);
  return cur;
}

const std::vector<DirectedStep>& HenonMap::steps(Direction dir) const {
  if (dir == Direction::combined) throw ConfigError("steps need forward or backward");
  return dir == Direction::forward ? fwd_steps_ : bwd_steps_;
}

double HenonMap::filtration_radius(Direction dir) const {
  return dir == Direction::backward ? bwd_radius_ : fwd_radius_;
}

HenonMap compose(const HenonMap& a, const HenonMap& b) {
  std::vector<ElementaryFactor> f(b.factors().begin(), b.factors().end());
  f.insert(f.end(), a.factors().begin(), a.factors().end());
  return HenonMap(std::move(f));
}

OrbitOutcome iterate(const HenonMap& map, const Point2C& q, int n, double escape_radius, Direction dir) {
  if (n < 0) throw ConfigError("iterate: n must be >= 0");
  if (!(escape_radius > 0)) throw ConfigError("iterate: escape radius must be positive");
  OrbitOutcome out;
  out.orbit.reserve(static_cast<std::size_t>(n) + 1);
  out.orbit.push_back(q);
  if (q.sup_norm() > escape_radius) {
    out.exit_step = 0;
    return out;
  }
  Point2C cur = q;
  for (int k = 1; k <= n; ++k) {
    try {
      cur = map.eval(cur, dir);
    } catch (const EscapedToInfinity& e) {
      out.orbit.push_back(e.last_finite());
      out.exit_step = k;
      return out;
    }
    out.orbit.push_back(cur);
    if (cur.sup_norm() > escape_radius) {
      out.exit_step = k;
      return out;
    }
  }
  return out;
}

}  // namespace henon
