#include "henonlab/product.hpp"

#include <cmath>

#include "henonlab/rng.hpp"

namespace henon {

PointPair product_map_eval(const HenonMap& map, const Point2C& z, const Point2C& w) {
  return {map.eval_forward(z), map.eval_backward(w)};
}

PointPair product_map_inverse(const HenonMap& map, const Point2C& z, const Point2C& w) {
  return {map.eval_backward(z), map.eval_forward(w)};
}

PointPair product_map_iterate(const HenonMap& map, const Point2C& z, const Point2C& w, int n) {
  PointPair p{z, w};
  for (int i = 0; i < std::abs(n); ++i)
    p = n > 0 ? product_map_eval(map, p.first, p.second) : product_map_inverse(map, p.first, p.second);
  return p;
}

std::string to_string(Sign s) { return s == Sign::plus ? "+" : "-"; }

namespace {
double sup_abs(const Observable& o, const std::array<double, 4>& radii, std::size_t samples, std::uint64_t seed) {
  const Bounds b = o.bounds_on(radii);
  double s = std::max(std::abs(b.lo), std::abs(b.hi));
  if (std::isfinite(s)) return s;
  s = 0.0;
  const CounterRng rng(seed, 0x50);
  std::uint64_t k = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    std::array<double, 4> x;
    for (int a = 0; a < 4; ++a) x[a] = (2.0 * rng.uniform(k++) - 1.0) * radii[a];
    s = std::max(s, std::abs(o(Point2C::from_real4(x))));
  }
  if (!std::isfinite(s)) throw ConfigError("test function '" + o.label + "' is unbounded on the box");
  return s;
}
}  // namespace

TestFunctionFamily::TestFunctionFamily(Observable phi, Observable psi, const std::array<double, 4>& radii,
                                       std::size_t samples, std::uint64_t seed)
    : phi_(std::move(phi)), psi_(std::move(psi)), radii_(radii) {
  const double sp = sup_abs(phi_, radii, samples, seed);
  const double sq = sup_abs(psi_, radii, samples, seed + 1);
  if (sp > 0.5) phi_scale_ = 0.5 / sp;
  if (sq > 0.5) psi_scale_ = 0.5 / sq;
  const CounterRng rng(seed, 0x51);
  std::uint64_t k = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    std::array<double, 4> x, y;
    for (int a = 0; a < 4; ++a) x[a] = (2.0 * rng.uniform(k++) - 1.0) * radii[a];
    for (int a = 0; a < 4; ++a) y[a] = (2.0 * rng.uniform(k++) - 1.0) * radii[a];
    const double u = this->phi(Point2C::from_real4(x)), v = this->psi(Point2C::from_real4(y));
    if (!(std::abs(u) <= 0.5 + 1e-12 && std::abs(v) <= 0.5 + 1e-12))
      throw ConfigError("test function family: sup exceeds 1/2 after rescaling");
  }
}

double TestFunctionFamily::phi_jl(int j, Sign s, double x) {
  if (j != 1 && j != 2) throw ConfigError("phi_j: j must be 1 or 2");
  return x * x + j * x + (s == Sign::plus ? 6.0 : -6.0);
}

double TestFunctionFamily::psi_jl(int l, Sign s, double y) {
  if (l != 1 && l != 2) throw ConfigError("psi_l: l must be 1 or 2");
  return s == Sign::plus ? y * y + l * y + 6.0 : -y * y - l * y + 6.0;
}

std::vector<TestFunctionFamily> builtin_families(const std::array<double, 4>& radii) {
  Observable log1p;
  log1p.eval = [](const Point2C& w) { return std::log1p(std::norm(w.z1) + std::norm(w.z2)); };
  log1p.psh.kind = PshRegion::Kind::everywhere;
  log1p.lower = 0.0;
  log1p.label = "log1p_norm_sq";
  log1p.box_bounds = [](const std::array<double, 4>& r) {
    return Bounds{0.0, std::log1p(r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + r[3] * r[3])};
  };
  std::vector<TestFunctionFamily> out;
  out.emplace_back(make_coord_sq(), make_coord_sq(), radii);
  out.emplace_back(make_coord_sq(), make_re_z1(), radii);
  out.emplace_back(truncate(make_log_distance({}), 10.0), log1p, radii);
  return out;
}

double eval_Phi(const TestFunctionFamily& fam, int j, int l, Sign s, const Point2C& z, const Point2C& w) {
  return TestFunctionFamily::phi_jl(j, s, fam.phi(z)) * TestFunctionFamily::psi_jl(l, s, fam.psi(w));
}

std::vector<PhiLeviReport> levi_check_Phi(const TestFunctionFamily& fam, std::size_t samples, double h, double tol,
                                          std::uint64_t seed) {
  SampleRegion region;
  for (int k = 0; k < 2; ++k)
    for (double r : fam.radii()) region.radii.push_back(r);
  std::vector<PhiLeviReport> out;
  for (Sign s : {Sign::plus, Sign::minus})
    for (int j = 1; j <= 2; ++j)
      for (int l = 1; l <= 2; ++l) {
        auto u = [&fam, j, l, s](const std::vector<double>& x) {
          return eval_Phi(fam, j, l, s, Point2C::from_real4({x[0], x[1], x[2], x[3]}),
                          Point2C::from_real4({x[4], x[5], x[6], x[7]}));
        };
        out.push_back({j, l, s, levi_check(u, region, samples, h, tol, seed)});
      }
  return out;
}

CoefficientSet CoefficientSet::paper() {
  CoefficientSet c;
  c.alpha_plus = {{{2, 0}, {0, 1}}};
  c.alpha_minus = {{{1, 1}, {1, 0}}};
  c.beta_plus = {{{1, 1}, {1, 0}}};
  c.beta_minus = {{{2, 0}, {0, 1}}};
  return c;
}

std::pair<int, int> coefficient_sums(const CoefficientSet& c) {
  int a = 0, b = 0;
  for (int j = 0; j < 2; ++j)
    for (int l = 0; l < 2; ++l) {
      a += c.alpha_plus[j][l] + c.alpha_minus[j][l];
      b += c.beta_plus[j][l] + c.beta_minus[j][l];
    }
  return {a, b};
}

double combination_lhs(const CoefficientSet& c, Combination which, double x, double y) {
  const auto& plus = which == Combination::A ? c.alpha_plus : c.beta_plus;
  const auto& minus = which == Combination::A ? c.alpha_minus : c.beta_minus;
  double s = 0.0;
  for (int j = 1; j <= 2; ++j)
    for (int l = 1; l <= 2; ++l) {
      s += plus[j - 1][l - 1] * TestFunctionFamily::phi_jl(j, Sign::plus, x) * TestFunctionFamily::psi_jl(l, Sign::plus, y);
      s += minus[j - 1][l - 1] * TestFunctionFamily::phi_jl(j, Sign::minus, x) *
           TestFunctionFamily::psi_jl(l, Sign::minus, y);
    }
  return s;
}

double combination_rhs(Combination which, double x, double y) {
  const double cross = which == Combination::A ? x * y : -x * y;
  return cross + 36.0 * x * x + 36.0 * y * y + 48.0 * x + 48.0 * y;
}

double combination_residual_values(const CoefficientSet& c, Combination which, double x, double y) {
  const double l = combination_lhs(c, which, x, y), r = combination_rhs(which, x, y);
  return std::abs(l - r) / std::max({std::abs(l), std::abs(r), 1.0});
}

IdentityResult combination_identity_residual(const TestFunctionFamily& fam, const CoefficientSet& c, Combination which,
                                             const HenonMap& map, int n, const Point2C& z, const Point2C& w) {
  if (n < 0) throw ConfigError("combination identity: n must be >= 0");
  const auto& r = fam.radii();
  const double escape = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + r[3] * r[3]);
  IdentityResult out;
  const auto fz = iterate(map, z, n, escape, Direction::forward);
  const auto fw = iterate(map, w, n, escape, Direction::backward);
  if (!fz.survived() || !fw.survived()) return out;
  out.x = fam.phi(fz.last());
  out.y = fam.psi(fw.last());
  out.residual = combination_residual_values(c, which, out.x, out.y);
  return out;
}

}  // namespace henon
