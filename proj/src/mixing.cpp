#include "henonlab/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "henonlab/parallel.hpp"
#include "henonlab/rng.hpp"

namespace henon {

std::string to_string(EstimatorKind k) { return k == EstimatorKind::direct ? "direct" : "symmetric"; }

EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "direct") return EstimatorKind::direct;
  if (s == "symmetric") return EstimatorKind::symmetric;
  throw ConfigError("unknown estimator '" + s + "'");
}

WeightedPoints WeightedPoints::cells(const DiscreteMeasure& mu) {
  WeightedPoints w;
  for (std::size_t c : mu.support()) {
    w.points.push_back(mu.center(c));
    w.weights.push_back(mu.masses[c]);
  }
  return w;
}

WeightedPoints WeightedPoints::monte_carlo(const DiscreteMeasure& mu, std::size_t count, std::uint64_t seed) {
  WeightedPoints w;
  w.points = sample(mu, count, seed);
  w.weights.assign(w.points.size(), 1.0 / static_cast<double>(count));
  return w;
}

namespace {

constexpr std::size_t kChunk = 4096;
// Past this size an orbit only grows; compactly supported observables
// vanish there, so iteration stops instead of running into overflow.
constexpr double kFar = 1e100;

Point2C push(const HenonMap& map, Point2C x, int k, Direction dir, const GridGeometry& box, bool& left) {
  for (int i = 0; i < k; ++i) {
    if (x.sup_norm() > kFar) {
      left = true;
      return x;
    }
    try {
      x = map.eval(x, dir);
    } catch (const EscapedToInfinity& e) {
      left = true;
      return e.last_finite();
    }
    if (!box.contains(x)) left = true;
  }
  return x;
}

// Per-point products needed by every replicate.
struct Terms {
  std::vector<double> ab, a0, b0;  // phi(F x) psi(B x), phi(x), psi(x)
  std::vector<char> left;
};

Terms evaluate(const WeightedPoints& pts, const GridGeometry& box, const HenonMap& map, const Observable& phi,
               const Observable& psi, int n, EstimatorKind kind) {
  if (n < 0) throw ConfigError("correlation: lag must be >= 0");
  if (kind == EstimatorKind::symmetric && n % 2) throw ConfigError("symmetric estimator needs an even lag");
  const int nf = kind == EstimatorKind::direct ? n : n / 2;
  const int nb = kind == EstimatorKind::direct ? 0 : n / 2;
  const std::size_t N = pts.points.size();
  Terms t;
  t.ab.resize(N);
  t.a0.resize(N);
  t.b0.resize(N);
  t.left.resize(N);
  parallel_chunks(N, kChunk, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Point2C& x = pts.points[i];
      bool left = false;
      const Point2C fx = push(map, x, nf, Direction::forward, box, left);
      const Point2C bx = push(map, x, nb, Direction::backward, box, left);
      t.ab[i] = phi(fx) * psi(bx);
      t.a0[i] = phi(x);
      t.b0[i] = psi(x);
      t.left[i] = left;
    }
  });
  return t;
}

struct Sums {
  double w = 0, ab = 0, a = 0, b = 0, esc = 0;
  void add(const Sums& o) {
    w += o.w;
    ab += o.ab;
    a += o.a;
    b += o.b;
    esc += o.esc;
  }
  double estimate() const { return ab / w - (a / w) * (b / w); }
};

// Weighted sums with per-point multiplicity from `mult` (replicate r; r < 0 is
// the plain estimate). Chunked and reduced in order, so deterministic.
Sums reduce(const WeightedPoints& pts, const Terms& t, const CounterRng* rng) {
  const std::size_t N = pts.points.size();
  const std::size_t chunks = (N + kChunk - 1) / kChunk;
  std::vector<Sums> part(chunks);
  auto body = [&](std::size_t ci, std::size_t b, std::size_t e) {
    Sums s;
    for (std::size_t i = b; i < e; ++i) {
      double m = pts.weights[i];
      if (rng) {
        const int k = rng->poisson1(i);
        if (!k) continue;
        m *= k;
      }
      s.w += m;
      s.ab += m * t.ab[i];
      s.a += m * t.a0[i];
      s.b += m * t.b0[i];
      if (t.left[i]) s.esc += m;
    }
    part[ci] = s;
  };
  if (rng) {
    // Called from inside a parallel loop over replicates.
    for (std::size_t ci = 0; ci < chunks; ++ci) body(ci, ci * kChunk, std::min(N, (ci + 1) * kChunk));
  } else {
    parallel_chunks(N, kChunk, body);
  }
  Sums total;
  for (const auto& p : part) total.add(p);
  return total;
}

}  // namespace

CorrelationValue correlation_on(const WeightedPoints& pts, const GridGeometry& box, const HenonMap& map,
                                const Observable& phi, const Observable& psi, int n, EstimatorKind kind,
                                const CorrelationOptions& opt) {
  if (pts.points.empty()) throw ConfigError("correlation: empty point set");
  const Terms t = evaluate(pts, box, map, phi, psi, n, kind);
  const Sums s = reduce(pts, t, nullptr);
  CorrelationValue v;
  v.estimate = s.estimate();
  v.escaped = s.esc / s.w;
  v.mean_phi = s.a / s.w;
  v.mean_psi = s.b / s.w;
  if (opt.bootstrap >= 2) {
    std::vector<double> reps(opt.bootstrap);
    const CounterRng base(opt.seed, 0xb0);
    parallel_for(opt.bootstrap, [&](std::size_t r) {
      const CounterRng rng = base.split(r);
      const Sums s = reduce(pts, t, &rng);
      reps[r] = s.w > 0 ? s.estimate() : 0.0;
    });
    double mean = 0;
    for (double r : reps) mean += r;
    mean /= reps.size();
    double var = 0;
    for (double r : reps) var += (r - mean) * (r - mean);
    v.stderr_ = std::sqrt(var / (reps.size() - 1));
  }
  return v;
}

namespace {
WeightedPoints points_for(const DiscreteMeasure& mu, const CorrelationOptions& opt) {
  return opt.monte_carlo ? WeightedPoints::monte_carlo(mu, opt.monte_carlo, opt.seed) : WeightedPoints::cells(mu);
}

void check_escape(const CorrelationValue& v, int n, double limit) {
  if (v.escaped > limit) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "escape-dominated: %.1f%% of the mass leaves the box by depth %d; use a smaller n or extended "
                  "observables",
                  100 * v.escaped, n);
    throw NumericError(buf);
  }
}
}  // namespace

CorrelationValue correlation(const DiscreteMeasure& mu, const HenonMap& map, const Observable& phi,
                             const Observable& psi, int n, EstimatorKind kind, const CorrelationOptions& opt) {
  const CorrelationValue v = correlation_on(points_for(mu, opt), mu.geometry, map, phi, psi, n, kind, opt);
  check_escape(v, n, opt.max_escape);
  return v;
}

void mark_usable(CorrelationSeries& s, double noise_multiplier, double max_escape) {
  s.noise_multiplier = noise_multiplier;
  s.usable.assign(s.lags.size(), false);
  for (std::size_t i = 0; i < s.lags.size(); ++i) {
    const double c = std::abs(s.estimates[i]);
    s.usable[i] = std::isfinite(c) && c > 0 && c >= noise_multiplier * s.stderrs[i] && s.escaped[i] <= max_escape;
  }
}

CorrelationSeries correlation_series(const DiscreteMeasure& mu, const HenonMap& map, const Observable& phi,
                                     const Observable& psi, const std::vector<int>& lags, EstimatorKind kind,
                                     const CorrelationOptions& opt, double noise_multiplier) {
  if (lags.empty()) throw ConfigError("correlation series: empty lag list");
  for (std::size_t i = 1; i < lags.size(); ++i)
    if (lags[i] <= lags[i - 1]) throw ConfigError("correlation series: lags must increase");
  const WeightedPoints pts = points_for(mu, opt);
  CorrelationSeries s;
  s.kind = kind;
  s.sample_count = pts.points.size();
  s.seed = opt.seed;
  for (int n : lags) {
    const CorrelationValue v = correlation_on(pts, mu.geometry, map, phi, psi, n, kind, opt);
    s.lags.push_back(n);
    s.estimates.push_back(v.estimate);
    s.stderrs.push_back(v.stderr_);
    s.escaped.push_back(v.escaped);
  }
  mark_usable(s, noise_multiplier, opt.max_escape);
  return s;
}

namespace {
struct Line {
  double slope, intercept;
};

Line least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

double normal(const CounterRng& rng, std::uint64_t k) {
  const double u1 = 1.0 - rng.uniform(2 * k), u2 = rng.uniform(2 * k + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - i) * (v[i + 1] - v[i]);
}
}  // namespace

DecayFit fit_decay(const CorrelationSeries& s, double noise_multiplier, std::size_t bootstrap, std::uint64_t seed) {
  CorrelationSeries m = s;
  if (m.escaped.size() != m.lags.size()) m.escaped.assign(m.lags.size(), 0.0);
  mark_usable(m, noise_multiplier);
  std::size_t first = 0;
  while (first < m.lags.size() && !m.usable[first]) ++first;
  if (first == m.lags.size()) throw NumericError("no usable lags");
  std::size_t last = first;
  while (last + 1 < m.lags.size() && m.usable[last + 1]) ++last;
  const std::size_t count = last - first + 1;
  if (count < 3) throw NumericError("too few usable lags (" + std::to_string(count) + ", need 3)");
  std::vector<double> x, y;
  DecayFit f;
  for (std::size_t i = first; i <= last; ++i) {
    x.push_back(m.lags[i]);
    y.push_back(std::log(std::abs(m.estimates[i])));
    f.noise_floor = std::max(f.noise_floor, noise_multiplier * m.stderrs[i]);
  }
  const Line line = least_squares(x, y);
  f.slope = line.slope;
  f.intercept = line.intercept;
  f.window_first = m.lags[first];
  f.window_last = m.lags[last];
  f.points = count;
  f.slope_lo = f.slope_hi = f.slope;
  if (bootstrap >= 2) {
    // Parametric: redraw each C_n from N(C_n, stderr_n).
    const CounterRng rng(seed, 0xf1);
    std::vector<double> slopes;
    std::vector<double> yb(count);
    for (std::size_t r = 0; r < bootstrap; ++r) {
      for (std::size_t i = 0; i < count; ++i) {
        const double c = m.estimates[first + i] + m.stderrs[first + i] * normal(rng, r * count + i);
        yb[i] = std::log(std::max(std::abs(c), 1e-300));
      }
      slopes.push_back(least_squares(x, yb).slope);
    }
    f.slope_lo = quantile(slopes, 0.025);
    f.slope_hi = quantile(slopes, 0.975);
  }
  return f;
}

TailFit moderate_tail(const DiscreteMeasure& mu, const Observable& obs, const std::vector<double>& M_grid,
                      const TailOptions& opt) {
  if (M_grid.empty()) throw ConfigError("moderate tail: empty M grid");
  for (std::size_t i = 1; i < M_grid.size(); ++i)
    if (M_grid[i] <= M_grid[i - 1]) throw ConfigError("moderate tail: M grid must increase");
  const WeightedPoints pts = opt.monte_carlo ? WeightedPoints::monte_carlo(mu, opt.monte_carlo, opt.seed)
                                             : WeightedPoints::cells(mu);
  std::vector<double> v(pts.points.size());
  parallel_for(v.size(), [&](std::size_t i) { v[i] = std::abs(obs(pts.points[i])); });
  double total = 0;
  for (double w : pts.weights) total += w;
  TailFit t;
  t.M_grid = M_grid;
  for (double M : M_grid) {
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] > M) s += pts.weights[i];
    t.masses.push_back(s / total);
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < M_grid.size(); ++i)
    if (t.masses[i] > opt.min_mass) {
      x.push_back(M_grid[i]);
      y.push_back(std::log(t.masses[i]));
    }
  t.fitted = x.size();
  if (std::all_of(t.masses.begin(), t.masses.end(), [](double m) { return m == 0.0; })) {
    t.verdict = TailFit::Verdict::bounded;
    return t;
  }
  if (x.size() < 2) return t;
  const Line line = least_squares(x, y);
  t.alpha = -line.slope;
  t.c = std::exp(line.intercept);
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (line.intercept + line.slope * x[i]);
    rss += r * r;
  }
  t.residual = std::sqrt(rss / x.size());
  t.verdict = t.alpha > 0 && t.residual <= opt.max_residual ? TailFit::Verdict::fit : TailFit::Verdict::rejected;
  return t;
}

bool DshReport::all_within() const {
  return std::all_of(rows.begin(), rows.end(), [](const DshRow& r) { return !r.usable || r.within; });
}

namespace {
Observable clamp_below(const Observable& obs, double M) {
  Observable o = obs;
  auto inner = obs.eval;
  o.eval = [inner, M](const Point2C& q) {
    const double v = inner(q);
    return v >= -M ? v : -M;
  };
  o.lower = std::max(obs.lower, -M);
  o.label = "clamp:" + std::to_string(M) + ":" + obs.label;
  o.box_bounds = nullptr;
  return o;
}
}  // namespace

DshReport dsh_experiment(const DiscreteMeasure& mu, const HenonMap& map, const Observable& phi, const Observable& psi,
                         double alpha, const std::vector<int>& lags, EstimatorKind kind, const CorrelationOptions& opt,
                         double noise_multiplier) {
  if (!(alpha > 0)) throw ConfigError("dsh experiment: alpha must be positive");
  if (lags.empty()) throw ConfigError("dsh experiment: empty lag list");
  const WeightedPoints pts = WeightedPoints::cells(mu);
  DshReport rep;
  rep.alpha = alpha;
  rep.degree = map.degree();
  const double d = static_cast<double>(rep.degree);
  std::vector<double> fv(pts.points.size()), gv(pts.points.size());
  parallel_for(fv.size(), [&](std::size_t i) {
    fv[i] = phi(pts.points[i]);
    gv[i] = psi(pts.points[i]);
  });
  double total = 0;
  for (double w : pts.weights) total += w;
  for (int n : lags) {
    DshRow row;
    row.n = n;
    row.M = n * std::log(d) / alpha;
    const CorrelationValue raw = correlation_on(pts, mu.geometry, map, phi, psi, n, kind, opt);
    row.raw = raw.estimate;
    row.raw_stderr = raw.stderr_;
    row.escaped = raw.escaped;
    CorrelationOptions quick = opt;
    quick.bootstrap = 0;
    row.bounded =
        correlation_on(pts, mu.geometry, map, clamp_below(phi, row.M), clamp_below(psi, row.M), n, kind, quick).estimate;
    for (std::size_t i = 0; i < fv.size(); ++i) {
      const double w = pts.weights[i] / total;
      const double a = std::min(fv[i] + row.M, 0.0), b = std::min(gv[i] + row.M, 0.0);
      row.phi_l1 += w * std::abs(a);
      row.phi_l2 += w * a * a;
      row.psi_l1 += w * std::abs(b);
      row.psi_l2 += w * b * b;
    }
    row.phi_l2 = std::sqrt(row.phi_l2);
    row.psi_l2 = std::sqrt(row.psi_l2);
    const double c = std::abs(row.raw);
    row.usable = std::isfinite(c) && c > 0 && c >= noise_multiplier * row.raw_stderr && row.escaped <= opt.max_escape;
    rep.rows.push_back(row);
  }
  auto shape = [d](int n) { return std::pow(std::max(n, 1), 2) * std::pow(d, -0.5 * n); };
  for (const auto& r : rep.rows)
    if (r.usable) {
      rep.first_lag = r.n;
      rep.C0 = std::abs(r.raw) / shape(r.n);
      break;
    }
  for (auto& r : rep.rows) {
    r.envelope = rep.C0 * shape(r.n);
    r.within = !rep.first_lag || std::abs(r.raw) <= r.envelope * (1 + 1e-12);
  }
  return rep;
}

namespace {
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string series_csv(const CorrelationSeries& s) {
  std::string out = "n,estimate,stderr,usable\n";
  for (std::size_t i = 0; i < s.lags.size(); ++i)
    out += std::to_string(s.lags[i]) + "," + num(s.estimates[i]) + "," + num(s.stderrs[i]) + "," +
           (s.usable[i] ? "1" : "0") + "\n";
  return out;
}

std::string series_json(const CorrelationSeries& s, const std::optional<DecayFit>& fit, long long degree,
                        const std::string& note) {
  using nlohmann::ordered_json;
  const double ref = -0.5 * std::log(static_cast<double>(degree));
  ordered_json j;
  j["estimator"] = to_string(s.kind);
  j["samples"] = s.sample_count;
  j["seed"] = s.seed;
  j["noise_multiplier"] = s.noise_multiplier;
  j["reference_slope"] = ref;
  std::size_t usable = 0;
  for (bool u : s.usable) usable += u;
  j["usable_lags"] = usable;
  if (fit) {
    j["slope"] = fit->slope;
    j["intercept"] = fit->intercept;
    j["slope_ci"] = {fit->slope_lo, fit->slope_hi};
    j["window"] = {fit->window_first, fit->window_last};
    j["noise_floor"] = fit->noise_floor;
    j["verdict"] = fit->slope <= ref + 0.15 ? "consistent" : "slower";
  } else {
    j["slope"] = nullptr;
    j["verdict"] = "no fit";
  }
  if (!note.empty()) j["note"] = note;
  return j.dump(2) + "\n";
}

std::string dsh_csv(const DshReport& r) {
  std::string out = "n,M,raw,stderr,bounded,phi_l1,phi_l2,psi_l1,psi_l2,escaped,envelope,usable,within\n";
  for (const auto& w : r.rows)
    out += std::to_string(w.n) + "," + num(w.M) + "," + num(w.raw) + "," + num(w.raw_stderr) + "," + num(w.bounded) +
           "," + num(w.phi_l1) + "," + num(w.phi_l2) + "," + num(w.psi_l1) + "," + num(w.psi_l2) + "," +
           num(w.escaped) + "," + num(w.envelope) + "," + (w.usable ? "1" : "0") + "," + (w.within ? "1" : "0") + "\n";
  return out;
}

std::string dsh_json(const DshReport& r) {
  nlohmann::ordered_json j;
  j["alpha"] = r.alpha;
  j["degree"] = r.degree;
  j["C0"] = r.C0;
  if (r.first_lag)
    j["first_lag"] = *r.first_lag;
  else
    j["first_lag"] = nullptr;
  j["all_within"] = r.all_within();
  return j.dump(2) + "\n";
}

}  // namespace henon
