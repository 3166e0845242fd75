#include "henonlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "henonlab/green.hpp"
#include "henonlab/product.hpp"
#include "henonlab/rng.hpp"

namespace henon {

namespace {
Point2C random_point(CounterRng::Cursor& c, double r) {
  std::array<double, 4> x;
  for (double& v : x) v = (2.0 * c.uniform() - 1.0) * r;
  return Point2C::from_real4(x);
}

std::string fmt(const char* f, double a, double b = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

using Mat2 = std::array<cplx, 4>;  // row major

// Complex Jacobian of f by holomorphic difference quotients.
Mat2 jacobian(const HenonMap& map, const Point2C& q, Direction dir) {
  const double eps = 1e-7;
  const Point2C f0 = map.eval(q, dir);
  const Point2C a = map.eval({q.z1 + eps, q.z2}, dir), b = map.eval({q.z1, q.z2 + eps}, dir);
  return {(a.z1 - f0.z1) / eps, (b.z1 - f0.z1) / eps, (a.z2 - f0.z2) / eps, (b.z2 - f0.z2) / eps};
}
}  // namespace

SuiteResult suite_round_trip(const HenonMap& map, std::size_t count, double radius, std::uint64_t seed) {
  SuiteResult r;
  r.name = "map_round_trip";
  auto cur = CounterRng(seed, 0x11).cursor();
  for (std::size_t i = 0; i < count; ++i) {
    const Point2C q = random_point(cur, radius);
    const Point2C back = map.eval_backward(map.eval_forward(q));
    r.worst = std::max(r.worst, (back - q).norm() / std::max(q.norm(), 1.0));
  }
  r.margin = 1e-9 - r.worst;
  r.pass = r.margin >= 0;
  r.detail = fmt("max relative error %.3g over %.0f points", r.worst, count);
  return r;
}

SuiteResult suite_functional_equation(const HenonMap& map, std::size_t count, double radius, double tol,
                                      std::uint64_t seed) {
  SuiteResult r;
  r.name = "green_functional_equation";
  const double d = static_cast<double>(map.degree());
  auto cur = CounterRng(seed, 0x12).cursor();
  r.margin = INFINITY;
  double worst_gap = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const Point2C q = random_point(cur, radius);
    for (Direction dir : {Direction::forward, Direction::backward}) {
      Point2C fq;
      try {
        fq = map.eval(q, dir);
      } catch (const EscapedToInfinity&) {
        continue;
      }
      const GreenValue a = green_point(map, q, dir, tol), b = green_point(map, fq, dir, tol);
      const double gap = std::abs(b.value - d * a.value);
      const double allowed = b.error_bound + d * a.error_bound;
      worst_gap = std::max(worst_gap, gap);
      r.margin = std::min(r.margin, allowed - gap);
    }
  }
  r.worst = worst_gap;
  r.pass = r.margin >= 0;
  r.detail = fmt("max |G(f q) - d G(q)| = %.3g, tightest slack %.3g", worst_gap, r.margin);
  return r;
}

std::vector<Point2C> fixed_points(const HenonMap& map, double radius) {
  std::vector<Point2C> found;
  const int k = 7;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const double x = -radius + 2 * radius * i / (k - 1), y = -radius + 2 * radius * j / (k - 1);
      Point2C q{{x, 0.1 * y}, {x, -0.1 * y}};
      bool ok = false;
      try {
        for (int it = 0; it < 60; ++it) {
          const Point2C fq = map.eval_forward(q);
          const cplx r1 = fq.z1 - q.z1, r2 = fq.z2 - q.z2;
          if (std::abs(r1) + std::abs(r2) < 1e-14 * std::max(1.0, q.norm())) {
            ok = true;
            break;
          }
          Mat2 J = jacobian(map, q, Direction::forward);
          J[0] -= 1.0;
          J[3] -= 1.0;
          const cplx det = J[0] * J[3] - J[1] * J[2];
          if (std::abs(det) < 1e-14) break;
          q.z1 -= (J[3] * r1 - J[1] * r2) / det;
          q.z2 -= (-J[2] * r1 + J[0] * r2) / det;
          if (!q.finite() || q.sup_norm() > 10 * radius) break;
        }
      } catch (const EscapedToInfinity&) {
        ok = false;
      }
      if (!ok || q.sup_norm() > radius) continue;
      if (std::none_of(found.begin(), found.end(), [&](const Point2C& p) { return (p - q).norm() < 1e-8; }))
        found.push_back(q);
    }
  std::sort(found.begin(), found.end(), [](const Point2C& a, const Point2C& b) { return a.z1.real() < b.z1.real(); });
  return found;
}

std::vector<Point2C> stable_manifold_points(const HenonMap& map, std::size_t count, double radius,
                                            std::uint64_t seed) {
  const auto fixed = fixed_points(map, radius);
  if (fixed.empty()) throw NumericError("no fixed point inside the box");
  std::vector<Point2C> out;
  auto cur = CounterRng(seed, 0x13).cursor();
  for (std::size_t attempt = 0; out.size() < count && attempt < 100 * count; ++attempt) {
    const Point2C& p = fixed[attempt % fixed.size()];
    // Stable eigenvector of Df(p): eigenvalue of smaller modulus.
    const Mat2 J = jacobian(map, p, Direction::forward);
    const cplx tr = J[0] + J[3], det = J[0] * J[3] - J[1] * J[2];
    const cplx disc = std::sqrt(tr * tr - 4.0 * det);
    cplx l1 = 0.5 * (tr + disc), l2 = 0.5 * (tr - disc);
    if (std::abs(l1) > std::abs(l2)) std::swap(l1, l2);
    if (!(std::abs(l1) < 1.0 && std::abs(l2) > 1.0)) continue;  // not a saddle
    cplx v1 = J[1], v2 = l1 - J[0];
    if (std::abs(v1) + std::abs(v2) < 1e-12) {
      v1 = l1 - J[3];
      v2 = J[2];
    }
    const double nv = std::sqrt(std::norm(v1) + std::norm(v2));
    const cplx t = std::polar(1e-6, 2 * M_PI * cur.uniform());
    Point2C q{p.z1 + t * v1 / nv, p.z2 + t * v2 / nv};
    // f^-1 expands along the stable direction and pulls everything else onto it.
    const int k = 1 + static_cast<int>(cur.uniform() * 40);
    try {
      for (int i = 0; i < k && q.sup_norm() <= radius; ++i) {
        const Point2C next = map.eval_backward(q);
        if (next.sup_norm() > radius) break;
        q = next;
      }
    } catch (const EscapedToInfinity&) {
      continue;
    }
    if ((q - p).norm() < 1e-3) continue;
    out.push_back(q);
  }
  if (out.size() < count) throw NumericError("could not place enough points on the stable manifolds");
  return out;
}

SuiteResult suite_pullback(const HenonMap& map, std::size_t points, std::uint64_t seed) {
  SuiteResult r;
  r.name = "potential_pullback";
  const auto pts = stable_manifold_points(map, points, map.filtration_radius(Direction::forward), seed);
  std::vector<double> x, y;
  for (int n = 2; n <= 12; ++n) {
    double s = 0;
    for (const auto& q : pts) {
      const double g = green_point(map, q, Direction::forward, 1e-13).value;
      s += std::log(std::max(std::abs(green_potential_pullback(map, q, n) - g), 1e-300));
    }
    x.push_back(n);
    y.push_back(s / pts.size());
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size();
  my /= y.size();
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  const double slope = sxy / sxx, target = -std::log(static_cast<double>(map.degree()));
  r.worst = slope;
  r.margin = 0.3 - std::abs(slope - target);
  r.pass = r.margin >= 0;
  r.detail = fmt("slope %.4f, expected %.4f +- 0.3", slope, target);
  return r;
}

SuiteResult suite_coefficients(std::size_t count, std::uint64_t seed) {
  SuiteResult r;
  r.name = "coefficient_identities";
  const auto c = CoefficientSet::paper();
  auto cur = CounterRng(seed, 0x14).cursor();
  for (std::size_t i = 0; i < count; ++i) {
    const double x = cur.uniform() - 0.5, y = cur.uniform() - 0.5;
    for (Combination w : {Combination::A, Combination::B})
      r.worst = std::max(r.worst, combination_residual_values(c, w, x, y));
  }
  const auto [sa, sb] = coefficient_sums(c);
  r.margin = 1e-12 - r.worst;
  r.pass = r.margin >= 0 && sa == 6 && sb == 6;
  r.detail = fmt("max relative residual %.3g, sums %.0f", r.worst, sa) + fmt(" / %.0f", sb);
  return r;
}

SuiteResult suite_phi_levi(std::size_t samples, double radius, std::uint64_t seed) {
  SuiteResult r;
  r.name = "phi_levi";
  const double h = 1e-3;
  const double tol = 10 * h * h * 45.5625;  // sup |Phi| under sup |phi|, |psi| <= 1/2
  r.worst = INFINITY;
  double fraction = 1.0;
  for (const auto& fam : builtin_families({radius, radius, radius, radius}))
    for (const auto& rep : levi_check_Phi(fam, samples, h, tol, seed)) {
      r.worst = std::min(r.worst, rep.report.min_eigenvalue);
      fraction = std::min(fraction, rep.report.fraction);
    }
  r.margin = r.worst + tol;
  r.pass = fraction == 1.0;
  r.detail = fmt("min Levi eigenvalue %.3g, min fraction %.3f", r.worst, fraction);
  return r;
}

}  // namespace henon
