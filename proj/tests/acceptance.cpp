// Acceptance suite: `acceptance N [--cache DIR]` checks criterion N (1..14)
// and prints one PASS/FAIL line. Expensive artefacts are cached in DIR.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "henonlab/cli.hpp"
#include "henonlab/product.hpp"
#include "henonlab/rng.hpp"
#include "henonlab/verify.hpp"

using namespace henon;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string cache_dir = "acceptance_cache";

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string f(const char* fmt, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c, d);
  return buf;
}

ExperimentConfig reference_config() {
  ExperimentConfig c;
  c.cache = cache_dir;
  c.out = cache_dir + "/out";
  return c;
}

Workspace& workspace() {
  static Workspace ws(reference_config(), &std::cerr);
  return ws;
}

Outcome c01() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = suite_round_trip(HenonMap::reference(), 1000, 3.2);
  const double t = seconds_since(t0);
  return {r.pass && t < 1.0, r.detail + f(", %.3f s", t)};
}

Outcome c02() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = suite_functional_equation(HenonMap::reference(), 100, 3.2, 1e-8);
  const double t = seconds_since(t0);
  return {r.pass && t < 10.0, r.detail + f(", %.3f s", t)};
}

Outcome c03() {
  const auto r = suite_pullback(HenonMap::reference(), 20);
  return {r.pass, r.detail + " (points on the stable manifolds of the fixed points)"};
}

Outcome c04() {
  const auto t0 = std::chrono::steady_clock::now();
  const Calibration c = calibrate();
  const double t = seconds_since(t0);
  const double mass = c.calibration_mass();
  return {std::abs(mass - 1.0) <= 0.02 && t < 60.0,
          f("calibration mass %.5f, kappa %.6f (analytic %.6f), %.1f s", mass, c.kappa, kAnalyticKappa, t)};
}

Outcome c05() {
  // Always cold, so the runtime is the real one; the result refreshes the cache.
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = reference_config();
  const auto map = cfg.map();
  const auto g = GridGeometry::cube(cfg.radius, cfg.resolution);
  const GreenField p = build_field(map, g, Direction::forward, cfg.tol);
  const GreenField m = build_field(map, g, Direction::backward, cfg.tol);
  const double h = g.spacing(0);
  MeasureOptions opt;
  opt.clip_ceiling = 1.0;  // report the fraction instead of throwing
  const DiscreteMeasure mu = build_measure(mollify(p, cfg.mollification * h), mollify(m, cfg.mollification * h), opt);
  const double t = seconds_since(t0);
  const double mean_g = integrate_field(mu, combine(p, m));
  if (mu.clipped_fraction() <= cfg.clip_ceiling) workspace().measure();  // fills the cache for later criteria
  const bool ok = mu.raw_total >= 0.7 && mu.raw_total <= 1.3 && mu.clipped_fraction() <= 0.05 && mean_g <= 0.05 &&
                  t < 600.0;
  return {ok, f("raw_total %.4f, clipped %.4f, mean G %.4f (limit 0.05), %.1f s", mu.raw_total, mu.clipped_fraction(),
                mean_g, t)};
}

Outcome c06() {
  Workspace& ws = workspace();
  const DiscreteMeasure& mu = ws.measure();
  const auto cells = WeightedPoints::cells(mu);
  double worst = 0;
  std::string detail;
  for (const auto& label : {ws.config().phi, ws.config().psi}) {
    const Observable o = ws.observable(label);
    double a = 0, b = 0;
    for (std::size_t i = 0; i < cells.points.size(); ++i) {
      const Point2C& x = cells.points[i];
      a += cells.weights[i] * o(x);
      Point2C fx;
      try {
        fx = ws.map().eval_forward(x);
      } catch (const EscapedToInfinity&) {
        fx = Point2C{1e300, 1e300};
      }
      b += cells.weights[i] * o(fx);
    }
    const double osc = o.upper - o.lower;
    worst = std::max(worst, std::abs(b - a) / osc);
    detail += f("|<mu, phi o f> - <mu, phi>| / osc = %.4f; ", std::abs(b - a) / osc);
  }
  return {worst <= 0.05, detail + "limit 0.05"};
}

Outcome c07() {
  Workspace& ws = workspace();
  const ExtensionContext ctx = ws.extension_context(true);
  const auto& k = ctx.kappas;
  const auto& g = *ctx.g_lambda;
  const Observable base = parse_observable("trunc:5:log_dist:2.4,0,2.4,0", nullptr);
  ExtensionInfo info;
  const Observable ext = extend(base, ctx, &info);

  // Exactness on {G_l < kappa1}, at points drawn near K.
  const auto pts = sample(ws.measure(), 20000, 7);
  std::size_t exact = 0, tried = 0;
  for (const auto& q : pts) {
    if (tried == 1000) break;
    if (!(g(q) < k.kappa1)) continue;
    ++tried;
    exact += ext(q) == base(q);
  }
  // Vanishing where the cutoff is 0.
  const CounterRng rng(3, 0x77);
  std::uint64_t c = 0;
  std::size_t zero = 0, outside = 0;
  while (outside < 1000 && c < 4000000) {
    std::array<double, 4> x;
    for (double& v : x) v = (2 * rng.uniform(c++) - 1) * 10.0;
    const Point2C q = Point2C::from_real4(x);
    if (ctx.box.contains(q) && g(q) < k.kappa_cut) continue;
    ++outside;
    zero += ext(q) == 0.0;
  }
  // Plurisubharmonicity on the open set {G_l < kappa2}: a sample counts only
  // if its whole stencil (radius sqrt(2) h) stays inside, judged from G_l and
  // a local gradient with a factor 2 of slack.
  const double h = 0.02;
  SampleRegion region;
  region.radii = {4.0, 4.0, 4.0, 4.0};
  region.keep = [&g, &k, h](const std::vector<double>& x) {
    std::array<double, 4> y{x[0], x[1], x[2], x[3]};
    const double g0 = g(Point2C::from_real4(y));
    if (!(g0 < k.kappa2)) return false;
    double grad2 = 0;
    for (int a = 0; a < 4; ++a) {
      auto yp = y, ym = y;
      yp[a] += h;
      ym[a] -= h;
      const double d = (g(Point2C::from_real4(yp)) - g(Point2C::from_real4(ym))) / (2 * h);
      grad2 += d * d;
    }
    return g0 + 2.0 * std::sqrt(2.0) * h * std::sqrt(grad2) < k.kappa2;
  };
  const LeviReport levi = levi_check(ext, region, 300, h, 1e-6, 5);
  const bool ok = tried == 1000 && exact == tried && outside == 1000 && zero == outside && levi.fraction == 1.0;
  return {ok, f("exact %.0f/%.0f, zero %.0f/%.0f", exact, tried, zero, outside) +
                  f(", Levi fraction %.3f (min %.3g, h %.3g)", levi.fraction, levi.min_eigenvalue, h) +
                  f(", kappas %.4f %.4f %.4f", k.kappa1, k.kappa2, k.kappa_cut)};
}

Outcome c08() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = suite_phi_levi(1000, 2.0);
  const double t = seconds_since(t0);
  return {r.pass && t < 60.0, r.detail + f(", %.2f s", t)};
}

Outcome c09() {
  const auto r = suite_coefficients(10000);
  return {r.pass, r.detail};
}

Outcome c10() {
  const auto t0 = std::chrono::steady_clock::now();
  Workspace& ws = workspace();
  const auto& cfg = ws.config();
  const Observable phi = ws.observable(cfg.phi), psi = ws.observable(cfg.psi);
  CorrelationOptions opt;
  opt.bootstrap = cfg.bootstrap;
  opt.seed = cfg.seed;
  opt.max_escape = cfg.max_escape;
  const auto s = correlation_series(ws.measure(), ws.map(), phi, psi, cfg.lags, cfg.estimator, opt);
  std::string rows;
  std::size_t usable = 0;
  for (std::size_t i = 0; i < s.lags.size(); ++i) {
    rows += f(" n=%.0f C=%.3g se=%.2g esc=%.2f", s.lags[i], s.estimates[i], s.stderrs[i], s.escaped[i]);
    usable += s.usable[i];
  }
  const double t = seconds_since(t0);
  try {
    const DecayFit fit = fit_decay(s, cfg.noise_multiplier);
    const bool ok = fit.slope <= -0.5 * std::log(2.0) + 0.15 && fit.points >= 4 && t < 900;
    return {ok, f("slope %.4f (limit -0.197) over %.0f lags, %.1f s;", fit.slope, fit.points, t) + rows};
  } catch (const NumericError& e) {
    return {false, std::string("no fit: ") + e.what() + f(" (%.0f usable);", usable) + rows};
  }
}

TailFit tail_fit() {
  TailOptions opt;
  opt.monte_carlo = workspace().config().tail_samples;
  opt.min_mass = double(workspace().config().tail_min_count) / opt.monte_carlo;
  return moderate_tail(workspace().measure(), make_log_distance({{-1.25, 0}, {-1.25, 0}}),
                       workspace().config().tail_grid, opt);
}

Outcome c11() {
  const TailFit t = tail_fit();
  std::string masses;
  for (std::size_t i = 0; i < t.M_grid.size(); ++i) masses += f(" %.3g", t.masses[i]);
  return {t.alpha > 0 && t.residual <= 0.2,
          f("alpha %.3f, c %.3g, residual %.3f over %.0f points; masses", t.alpha, t.c, t.residual, t.fitted) + masses};
}

Outcome c12() {
  Workspace& ws = workspace();
  const auto& cfg = ws.config();
  const TailFit t = tail_fit();
  if (!(t.alpha > 0)) return {false, "no positive tail exponent"};
  const std::string guard = "trunc:" + format_real(cfg.dsh_guard) + ":";
  const Observable phi = ws.observable("ext:" + guard + cfg.dsh_phi), psi = ws.observable("ext:" + guard + cfg.dsh_psi);
  CorrelationOptions opt;
  opt.bootstrap = cfg.bootstrap;
  opt.seed = cfg.seed;
  opt.max_escape = cfg.max_escape;
  const DshReport r = dsh_experiment(ws.measure(), ws.map(), phi, psi, t.alpha, cfg.dsh_lags, EstimatorKind::direct, opt);
  // Usable lags must sit under the envelope. Lags lost in noise (but not in
  // escape) are held to envelope + 3 stderr, so the check is not vacuous when
  // only the first lag clears the noise floor.
  std::size_t usable = 0, checked = 0;
  bool ok = r.first_lag.has_value() && r.all_within();
  std::string rows;
  for (const auto& row : r.rows) {
    usable += row.usable;
    if (r.first_lag && row.n != *r.first_lag && row.escaped <= opt.max_escape) {
      ++checked;
      ok = ok && std::abs(row.raw) <= row.envelope + 3 * row.raw_stderr;
    }
    rows += f(" n=%.0f |C|=%.3g se=%.2g env=%.3g", row.n, std::abs(row.raw), row.raw_stderr, row.envelope) +
            f(" esc=%.2f", row.escaped);
  }
  return {ok && checked >= 2,
          f("alpha %.3f, C0 %.3g, %.0f usable lags, %.0f further escape-free lags checked;", t.alpha, r.C0, usable,
            checked) +
              rows};
}

Outcome c13() {
  CorrelationSeries s;
  for (int n = 0; n <= 12; ++n) {
    s.lags.push_back(n);
    s.estimates.push_back(4.0 * std::pow(0.5, n));
  }
  s.stderrs.assign(s.lags.size(), 0.0);
  s.escaped.assign(s.lags.size(), 0.0);
  const DecayFit fit = fit_decay(s);
  const double ds = std::abs(fit.slope - std::log(0.5)), di = std::abs(fit.intercept - std::log(4.0));
  return {ds <= 1e-12 && di <= 1e-12, f("slope error %.3g, intercept error %.3g", ds, di)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome c14() {
  // Two cold runs of the command line driver on a small grid.
  const fs::path root = fs::path(cache_dir) / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cfg = R"({"grid": {"resolution": 20},
    "extension": {"resolution": 20},
    "correlation": {"lags": [0, 1, 2], "estimator": "direct", "bootstrap": 20, "max_escape": 1.0}})";
  std::ofstream(root / "config.json") << cfg;
  // Runs a and b start cold; run c reuses the cache written by a.
  const std::string conf = (root / "config.json").string(), warm = (root / "a" / "cache").string();
  for (const char* run_name : {"a", "b", "c"}) {
    const std::string out = (root / run_name).string();
    const std::string cache = run_name[0] == 'c' ? warm : (root / run_name / "cache").string();
    for (const char* cmd : {"build-measure", "correlate"}) {
      const char* argv[] = {"henonlab", "--config", conf.c_str(), "--out", out.c_str(), "--cache", cache.c_str(),
                            "--seed", "11", cmd};
      std::ostringstream o, e;
      const int code = run(10, argv, o, e);
      if (code != 0) return {false, std::string(cmd) + " failed: " + e.str()};
    }
  }
  std::size_t same = 0, total = 0;
  for (const char* file : {"measure.csv", "measure.json", "correlation.csv", "correlation.json"}) {
    const std::string a = slurp(root / "a" / file);
    for (const char* other : {"b", "c"}) {
      ++total;
      same += !a.empty() && a == slurp(root / other / file);
    }
  }
  return {same == total, f("%.0f of %.0f output files byte-identical (cold vs cold, cold vs cached)", same, total)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance N [--cache DIR]\n";
    return 2;
  }
  for (int i = 2; i + 1 < argc; ++i)
    if (std::strcmp(argv[i], "--cache") == 0) cache_dir = argv[i + 1];
  const int n = std::atoi(argv[1]);
  static const std::function<Outcome()> criteria[] = {c01, c02, c03, c04, c05, c06, c07,
                                                       c08, c09, c10, c11, c12, c13, c14};
  if (n < 1 || n > 14) {
    std::cerr << "criterion must be 1..14\n";
    return 2;
  }
  Outcome o;
  try {
    o = criteria[n - 1]();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  std::printf("criterion %2d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
  return o.pass ? 0 : 1;
}
