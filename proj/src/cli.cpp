#include "henonlab/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <unistd.h>

#include "henonlab/parallel.hpp"
#include "henonlab/product.hpp"
#include "henonlab/verify.hpp"

namespace henon {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

namespace {

void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (std::find_if(keys.begin(), keys.end(), [&](const char* a) { return k == a; }) == keys.end())
      throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  }
}

cplx read_complex(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError("expected a number or [re, im] in " + where);
}

json complex_json(cplx c) { return c.imag() == 0.0 ? json(c.real()) : json::array({c.real(), c.imag()}); }

}  // namespace

HenonMap named_map(const std::string& name) {
  if (name == "reference") return HenonMap::reference();
  if (name == "square") return HenonMap::single({0.0, 0.0, 1.0}, 1.0);
  throw ConfigError("unknown map '" + name + "'");
}

HenonMap ExperimentConfig::map() const {
  if (map_name == "custom") return HenonMap(factors);
  return named_map(map_name);
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  allow_keys(j, {"version", "map", "grid", "extension", "correlation", "dsh", "seed", "output"}, "config");
  read(j, "version", c.version, "config");
  if (c.version != 1) throw ConfigError("unsupported config version " + std::to_string(c.version));
  if (j.contains("map")) {
    const json& m = j["map"];
    if (m.is_string()) {
      c.map_name = m.get<std::string>();
      named_map(c.map_name);
    } else {
      allow_keys(m, {"factors"}, "map");
      if (!m.contains("factors") || !m["factors"].is_array() || m["factors"].empty())
        throw ConfigError("map.factors must be a non-empty list");
      c.map_name = "custom";
      for (const auto& f : m["factors"]) {
        allow_keys(f, {"p", "delta"}, "map.factors");
        if (!f.contains("p") || !f["p"].is_array() || !f.contains("delta"))
          throw ConfigError("each factor needs 'p' (coefficients, constant first) and 'delta'");
        std::vector<cplx> coeffs;
        for (const auto& a : f["p"]) coeffs.push_back(read_complex(a, "map.factors.p"));
        c.factors.emplace_back(Polynomial(coeffs), read_complex(f["delta"], "map.factors.delta"));
      }
    }
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    allow_keys(g, {"radius", "resolution", "tol", "mollification", "kappa", "clip_ceiling"}, "grid");
    read(g, "radius", c.radius, "grid");
    read(g, "resolution", c.resolution, "grid");
    read(g, "tol", c.tol, "grid");
    read(g, "mollification", c.mollification, "grid");
    read(g, "clip_ceiling", c.clip_ceiling, "grid");
    if (g.contains("kappa")) {
      if (g["kappa"].is_number())
        c.kappa = format_real(g["kappa"].get<double>());
      else
        read(g, "kappa", c.kappa, "grid");
    }
  }
  if (j.contains("extension")) {
    const json& e = j["extension"];
    allow_keys(e, {"radius", "resolution", "mollification", "delta", "split"}, "extension");
    read(e, "radius", c.ext_radius, "extension");
    read(e, "resolution", c.ext_resolution, "extension");
    read(e, "mollification", c.ext_mollification, "extension");
    read(e, "split", c.ext_split, "extension");
    if (e.contains("delta") && !e["delta"].is_null()) {
      double d = 0;
      read(e, "delta", d, "extension");
      c.ext_delta = d;
    }
  }
  if (j.contains("correlation")) {
    const json& k = j["correlation"];
    allow_keys(k, {"phi", "psi", "lags", "estimator", "bootstrap", "noise_multiplier", "max_escape"}, "correlation");
    read(k, "phi", c.phi, "correlation");
    read(k, "psi", c.psi, "correlation");
    read(k, "lags", c.lags, "correlation");
    std::string est = to_string(c.estimator);
    read(k, "estimator", est, "correlation");
    c.estimator = estimator_from_string(est);
    read(k, "bootstrap", c.bootstrap, "correlation");
    read(k, "noise_multiplier", c.noise_multiplier, "correlation");
    read(k, "max_escape", c.max_escape, "correlation");
  }
  if (j.contains("dsh")) {
    const json& d = j["dsh"];
    allow_keys(d, {"phi", "psi", "guard", "lags", "tail_grid", "tail_samples", "tail_min_count", "tail_max_residual"},
               "dsh");
    read(d, "phi", c.dsh_phi, "dsh");
    read(d, "psi", c.dsh_psi, "dsh");
    read(d, "guard", c.dsh_guard, "dsh");
    read(d, "lags", c.dsh_lags, "dsh");
    read(d, "tail_grid", c.tail_grid, "dsh");
    read(d, "tail_samples", c.tail_samples, "dsh");
    read(d, "tail_min_count", c.tail_min_count, "dsh");
    read(d, "tail_max_residual", c.tail_max_residual, "dsh");
  }
  read(j, "seed", c.seed, "config");
  if (j.contains("output")) {
    const json& o = j["output"];
    allow_keys(o, {"dir", "cache"}, "output");
    read(o, "dir", c.out, "output");
    read(o, "cache", c.cache, "output");
  }

  if (!(c.radius > 0) || c.resolution < 8) throw ConfigError("grid needs radius > 0 and resolution >= 8");
  if (!(c.tol > 0) || !(c.mollification > 0)) throw ConfigError("grid tol and mollification must be positive");
  if (c.kappa != "analytic" && c.kappa != "calibrated") {
    double v = 0;
    const auto r = std::from_chars(c.kappa.data(), c.kappa.data() + c.kappa.size(), v);
    if (r.ec != std::errc() || r.ptr != c.kappa.data() + c.kappa.size() || !(v > 0))
      throw ConfigError("grid.kappa must be 'analytic', 'calibrated' or a positive number");
  }
  if (!(c.ext_radius > 0) || c.ext_resolution < 8 || !(c.ext_mollification > 0))
    throw ConfigError("extension needs radius > 0, resolution >= 8, mollification > 0");
  if (!(c.ext_split > 0 && c.ext_split < 1)) throw ConfigError("extension.split must lie in (0, 1)");
  if (c.lags.empty() || c.dsh_lags.empty()) throw ConfigError("lag lists must not be empty");
  if (!(c.noise_multiplier > 0) || !(c.max_escape >= 0 && c.max_escape <= 1))
    throw ConfigError("bad noise multiplier or escape limit");
  if (!(c.dsh_guard > 0)) throw ConfigError("dsh.guard must be positive");
  c.map();  // validates custom factors
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string ExperimentConfig::dump() const {
  nlohmann::ordered_json j;
  j["version"] = version;
  if (map_name == "custom") {
    json fl = json::array();
    for (const auto& f : factors) {
      json p = json::array();
      for (const auto& a : f.p.coeffs()) p.push_back(complex_json(a));
      fl.push_back({{"p", p}, {"delta", complex_json(f.twist)}});
    }
    j["map"] = {{"factors", fl}};
  } else {
    j["map"] = map_name;
  }
  j["grid"] = {{"radius", radius},         {"resolution", resolution}, {"tol", tol},
               {"mollification", mollification}, {"kappa", kappa}, {"clip_ceiling", clip_ceiling}};
  j["extension"] = {{"radius", ext_radius},
                    {"resolution", ext_resolution},
                    {"mollification", ext_mollification},
                    {"delta", ext_delta ? json(*ext_delta) : json(nullptr)},
                    {"split", ext_split}};
  j["correlation"] = {{"phi", phi},
                      {"psi", psi},
                      {"lags", lags},
                      {"estimator", to_string(estimator)},
                      {"bootstrap", bootstrap},
                      {"noise_multiplier", noise_multiplier},
                      {"max_escape", max_escape}};
  j["dsh"] = {{"phi", dsh_phi},          {"psi", dsh_psi},           {"guard", dsh_guard},
              {"lags", dsh_lags},        {"tail_grid", tail_grid},   {"tail_samples", tail_samples},
              {"tail_min_count", tail_min_count},
              {"tail_max_residual", tail_max_residual}};
  j["seed"] = seed;
  j["output"] = {{"dir", out}, {"cache", cache}};
  return j.dump(2);
}

std::string format_real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  if (std::isfinite(v) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

// ---------------------------------------------------------------- workspace

namespace {
std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string map_key(const ExperimentConfig& c) {
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(c.dump());
  return j["map"].dump();
}

// Writes through a temporary so a concurrent reader never sees half a file.
template <class F>
void atomic_write(const fs::path& path, F write) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp" + std::to_string(::getpid());
  write(tmp.string());
  fs::rename(tmp, path);
}
}  // namespace

Workspace::Workspace(ExperimentConfig cfg, std::ostream* log) : cfg_(std::move(cfg)), map_(cfg_.map()), log_(log) {}

void Workspace::note(const std::string& s) const {
  if (log_) *log_ << s << std::endl;
}

fs::path Workspace::cache_path(const std::string& kind, const std::string& key) const {
  const std::string dir = cfg_.cache.empty() ? (fs::path(cfg_.out) / "cache").string() : cfg_.cache;
  return fs::path(dir) / (kind + "_" + hex(fnv1a(key)));
}

const GreenField& Workspace::raw_field(Direction dir) {
  auto& slot = dir == Direction::forward ? plus_ : minus_;
  if (slot) return *slot;
  if (dir == Direction::combined) throw ConfigError("raw_field: forward or backward");
  const std::string key = map_key(cfg_) + format_real(cfg_.radius) + std::to_string(cfg_.resolution) +
                          format_real(cfg_.tol) + to_string(dir);
  const fs::path path = cache_path("green_" + to_string(dir), key).concat(".grnf");
  if (fs::exists(path)) {
    slot = std::make_unique<GreenField>(load_field(path.string()));
  } else {
    note("building " + to_string(dir) + " Green field");
    slot = std::make_unique<GreenField>(
        build_field(map_, GridGeometry::cube(cfg_.radius, cfg_.resolution), dir, cfg_.tol));
    atomic_write(path, [&](const std::string& p) { save_field(p, *slot); });
  }
  return *slot;
}

const Calibration& Workspace::calibration() {
  if (cal_) return *cal_;
  const fs::path path = cache_path("calibration", "v1").concat(".json");
  if (fs::exists(path)) {
    std::ifstream in(path);
    const json j = json::parse(in);
    Calibration c;
    c.spacing = j["spacing"];
    for (const auto& b : j["boxes"]) c.boxes.push_back({b["radius"], b["nodes"], b["sum"]});
    c.extrapolated_sum = j["extrapolated_sum"];
    c.kappa = j["kappa"];
    cal_ = std::make_unique<Calibration>(c);
  } else {
    note("calibrating the wedge constant");
    cal_ = std::make_unique<Calibration>(calibrate());
    nlohmann::ordered_json j;
    j["spacing"] = cal_->spacing;
    j["boxes"] = json::array();
    for (const auto& b : cal_->boxes) j["boxes"].push_back({{"radius", b.radius}, {"nodes", b.nodes}, {"sum", b.sum}});
    j["extrapolated_sum"] = cal_->extrapolated_sum;
    j["kappa"] = cal_->kappa;
    atomic_write(path, [&](const std::string& p) { std::ofstream(p) << j.dump(2) << "\n"; });
  }
  return *cal_;
}

double Workspace::kappa() {
  if (cfg_.kappa == "analytic") return kAnalyticKappa;
  if (cfg_.kappa == "calibrated") return calibration().kappa;
  return std::stod(cfg_.kappa);
}

const DiscreteMeasure& Workspace::measure() {
  if (mu_) return *mu_;
  const double k = kappa();
  const std::string key = map_key(cfg_) + format_real(cfg_.radius) + std::to_string(cfg_.resolution) +
                          format_real(cfg_.tol) + format_real(cfg_.mollification) + format_real(k) +
                          format_real(cfg_.clip_ceiling);
  const fs::path path = cache_path("measure", key).concat(".eqms");
  if (fs::exists(path)) {
    mu_ = std::make_unique<DiscreteMeasure>(load_measure(path.string()));
    return *mu_;
  }
  const GreenField& p = raw_field(Direction::forward);
  const GreenField& m = raw_field(Direction::backward);
  note("mollifying and building the measure");
  const double h = p.geometry.spacing(0);
  MeasureOptions opt;
  opt.kappa = k;
  opt.clip_ceiling = cfg_.clip_ceiling;
  mu_ = std::make_unique<DiscreteMeasure>(
      build_measure(mollify(p, cfg_.mollification * h), mollify(m, cfg_.mollification * h), opt));
  atomic_write(path, [&](const std::string& f) { save_measure(f, *mu_); });
  return *mu_;
}

const GreenField& Workspace::ext_raw() {
  if (ext_raw_) return *ext_raw_;
  const std::string key =
      map_key(cfg_) + format_real(cfg_.ext_radius) + std::to_string(cfg_.ext_resolution) + format_real(cfg_.tol);
  const fs::path path = cache_path("ext_green", key).concat(".grnf");
  if (fs::exists(path)) {
    ext_raw_ = std::make_unique<GreenField>(load_field(path.string()));
  } else {
    note("building the extension-box Green field");
    ext_raw_ = std::make_unique<GreenField>(build_field(
        map_, GridGeometry::cube(cfg_.ext_radius, cfg_.ext_resolution), Direction::combined, cfg_.tol));
    atomic_write(path, [&](const std::string& p) { save_field(p, *ext_raw_); });
  }
  return *ext_raw_;
}

const GreenField& Workspace::ext_mollified() {
  if (!ext_moll_) {
    const GreenField& raw = ext_raw();
    ext_moll_ = std::make_unique<GreenField>(mollify(raw, cfg_.ext_mollification * raw.geometry.spacing(0)));
  }
  return *ext_moll_;
}

const SublevelThresholds& Workspace::ext_thresholds() {
  if (!thresholds_) {
    const GreenField& raw = ext_raw();
    const double delta = cfg_.ext_delta ? *cfg_.ext_delta : default_delta(raw);
    thresholds_ = sublevel_thresholds(raw, ext_mollified(), delta, cfg_.ext_split);
  }
  return *thresholds_;
}

ExtensionContext Workspace::extension_context(bool pointwise) {
  ExtensionContext ctx;
  ctx.box = ext_raw().geometry;
  ctx.kappas = ext_thresholds();
  if (pointwise) {
    const double h = ctx.box.spacing(0);
    const std::array<double, 4> sp{ctx.box.spacing(0), ctx.box.spacing(1), ctx.box.spacing(2), ctx.box.spacing(3)};
    MollifiedGreen g(map_, MollifierKernel::make(cfg_.ext_mollification * h, sp),
                     Direction::combined, cfg_.tol);
    ctx.g_lambda = std::make_shared<const std::function<double(const Point2C&)>>(std::move(g));
  } else {
    auto field = std::make_shared<GreenField>(ext_mollified());
    ctx.g_lambda = std::make_shared<const std::function<double(const Point2C&)>>(
        [field](const Point2C& q) { return field->interpolate(q).value_or(INFINITY); });
  }
  return ctx;
}

Observable Workspace::observable(const std::string& label, bool pointwise) {
  if (label.find("ext:") == std::string::npos) return parse_observable(label, nullptr);
  const ExtensionContext ctx = extension_context(pointwise);
  return parse_observable(label, &ctx);
}

// ---------------------------------------------------------------- render

std::vector<unsigned char> render_julia(const HenonMap& map, const RenderOptions& opt) {
  if (opt.resolution < 2) throw ConfigError("render resolution must be >= 2");
  if (!(opt.radius > 0) || opt.n_max < 1) throw ConfigError("render radius and n_max must be positive");
  if (opt.direction == Direction::combined) throw ConfigError("render: forward (K+) or backward (K-)");
  if (opt.slice.size() < 3 || (opt.slice[0] != 'w' && opt.slice[0] != 'z') || opt.slice[1] != '=')
    throw ConfigError("slice must look like w=<c> or z=<c>");
  double c = 0;
  const std::string v = opt.slice.substr(2);
  const auto r = std::from_chars(v.data(), v.data() + v.size(), c);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ConfigError("bad slice value '" + v + "'");
  const bool vary_z = opt.slice[0] == 'w';
  const unsigned N = opt.resolution;
  const double escape = map.filtration_radius(opt.direction);
  std::vector<unsigned char> px(std::size_t{N} * N);
  parallel_for(N, [&](std::size_t row) {
    const double im = opt.radius - 2.0 * opt.radius * row / (N - 1);
    for (unsigned col = 0; col < N; ++col) {
      const cplx t(-opt.radius + 2.0 * opt.radius * col / (N - 1), im);
      const Point2C q = vary_z ? Point2C{t, c} : Point2C{c, t};
      const auto o = iterate(map, q, opt.n_max, escape, opt.direction);
      // Points of K stay black; fast escape is bright.
      px[row * N + col] = o.survived() ? 0 : static_cast<unsigned char>(std::lround(255.0 * std::exp(-*o.exit_step / 4.0)));
    }
  });
  return px;
}

void write_pgm(const fs::path& path, unsigned width, unsigned height, const std::vector<unsigned char>& pixels) {
  if (pixels.size() != std::size_t{width} * height) throw ConfigError("pgm: pixel count mismatch");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  os << "P5 " << width << " " << height << " 255\n";
  os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

// ---------------------------------------------------------------- commands

namespace {

struct VerificationFailure : Error {
  using Error::Error;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  os << text;
}

std::array<double, 4> parse_point(const std::string& s) {
  std::array<double, 4> x{};
  std::stringstream ss(s);
  std::string part;
  int k = 0;
  while (std::getline(ss, part, ',')) {
    if (k >= 4) throw ConfigError("point '" + s + "' needs 4 coordinates");
    const auto r = std::from_chars(part.data(), part.data() + part.size(), x[k]);
    if (r.ec != std::errc() || r.ptr != part.data() + part.size()) throw ConfigError("bad coordinate in '" + s + "'");
    ++k;
  }
  if (k != 4) throw ConfigError("point '" + s + "' needs 4 coordinates");
  return x;
}

int cmd_green(const ExperimentConfig& cfg, const std::string& map_name, const std::vector<std::string>& points,
              std::ostream& out) {
  const HenonMap map = map_name.empty() ? cfg.map() : named_map(map_name);
  if (points.empty()) throw ConfigError("green: give at least one --point");
  for (const auto& s : points) {
    const Point2C q = Point2C::from_real4(parse_point(s));
    const GreenValue p = green_point(map, q, Direction::forward, cfg.tol);
    const GreenValue m = green_point(map, q, Direction::backward, cfg.tol);
    out << "point " << s << " G+ " << format_real(p.value) << " +- " << format_real(p.error_bound) << " G- "
        << format_real(m.value) << " +- " << format_real(m.error_bound) << " G " << format_real(std::max(p.value, m.value))
        << "\n";
  }
  return 0;
}

int cmd_build_measure(Workspace& ws, std::ostream& out) {
  const auto& cfg = ws.config();
  const DiscreteMeasure& mu = ws.measure();
  const double mean_g = integrate_field(mu, combine(ws.raw_field(Direction::forward), ws.raw_field(Direction::backward)));
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  save_measure((dir / "measure.eqms").string(), mu);
  {
    std::ofstream csv(dir / "measure.csv", std::ios::binary);
    write_measure_csv(csv, mu);
  }
  nlohmann::ordered_json j;
  j["raw_total"] = mu.raw_total;
  j["clipped_fraction"] = mu.clipped_fraction();
  j["support"] = mu.support().size();
  j["mean_G"] = mean_g;
  j["kappa"] = ws.kappa();
  write_text(dir / "measure.json", j.dump(2) + "\n");
  out << "raw_total " << format_real(mu.raw_total) << " clipped_fraction " << format_real(mu.clipped_fraction())
      << " support " << mu.support().size() << " mean_G " << format_real(mean_g) << "\n";
  return 0;
}

int cmd_verify(const ExperimentConfig& cfg, std::ostream& out) {
  const HenonMap map = cfg.map();
  const double R = std::max(cfg.radius, 1.0);
  const std::vector<SuiteResult> suites{suite_round_trip(map, 1000, R, cfg.seed),
                                        suite_functional_equation(map, 100, R, 1e-8, cfg.seed),
                                        suite_pullback(map, 20, cfg.seed), suite_coefficients(10000, cfg.seed),
                                        suite_phi_levi(200, 2.0, cfg.seed)};
  bool ok = true;
  for (const auto& s : suites) {
    out << s.name << " " << (s.pass ? "pass" : "fail") << " " << format_real(s.margin) << "  (" << s.detail << ")\n";
    ok = ok && s.pass;
  }
  if (!ok) throw VerificationFailure("verification failed");
  return 0;
}

int cmd_correlate(Workspace& ws, std::ostream& out) {
  const auto& cfg = ws.config();
  const DiscreteMeasure& mu = ws.measure();
  const Observable phi = ws.observable(cfg.phi), psi = ws.observable(cfg.psi);
  CorrelationOptions opt;
  opt.bootstrap = cfg.bootstrap;
  opt.seed = cfg.seed;
  opt.max_escape = cfg.max_escape;
  const auto s = correlation_series(mu, ws.map(), phi, psi, cfg.lags, cfg.estimator, opt, cfg.noise_multiplier);
  std::optional<DecayFit> fit;
  std::string note;
  try {
    fit = fit_decay(s, cfg.noise_multiplier, 1000, cfg.seed);
  } catch (const NumericError& e) {
    note = e.what();
  }
  const fs::path dir(cfg.out);
  write_text(dir / "correlation.csv", series_csv(s));
  write_text(dir / "correlation.json", series_json(s, fit, ws.map().degree(), note));
  out << series_csv(s);
  if (fit)
    out << "slope " << format_real(fit->slope) << " reference " << format_real(-0.5 * std::log(double(ws.map().degree())))
        << "\n";
  else
    out << "no fit: " << note << "\n";
  return 0;
}

int cmd_dsh(Workspace& ws, std::ostream& out) {
  const auto& cfg = ws.config();
  const DiscreteMeasure& mu = ws.measure();
  TailOptions topt;
  topt.monte_carlo = cfg.tail_samples;
  topt.seed = cfg.seed;
  topt.max_residual = cfg.tail_max_residual;
  topt.min_mass = cfg.tail_samples ? double(cfg.tail_min_count) / cfg.tail_samples : 0.0;
  const Observable rphi = ws.observable(cfg.dsh_phi), rpsi = ws.observable(cfg.dsh_psi);
  const TailFit tphi = moderate_tail(mu, rphi, cfg.tail_grid, topt), tpsi = moderate_tail(mu, rpsi, cfg.tail_grid, topt);
  nlohmann::ordered_json tails;
  for (const auto* t : {&tphi, &tpsi}) {
    const char* verdict = t->verdict == TailFit::Verdict::fit ? "fit" : t->verdict == TailFit::Verdict::bounded ? "bounded" : "rejected";
    tails.push_back({{"verdict", verdict}, {"alpha", t->alpha}, {"c", t->c}, {"residual", t->residual},
                     {"M_grid", t->M_grid}, {"masses", t->masses}});
  }
  const fs::path dir(cfg.out);
  double alpha = INFINITY;
  for (const auto* t : {&tphi, &tpsi})
    if (t->alpha > 0) alpha = std::min(alpha, t->alpha);
  if (!std::isfinite(alpha)) {
    write_text(dir / "tail.json", tails.dump(2) + "\n");
    throw NumericError("dsh: no positive tail exponent; the observables look bounded under mu");
  }
  const std::string guard = "trunc:" + format_real(cfg.dsh_guard) + ":";
  const Observable phi = ws.observable("ext:" + guard + cfg.dsh_phi), psi = ws.observable("ext:" + guard + cfg.dsh_psi);
  CorrelationOptions opt;
  opt.bootstrap = cfg.bootstrap;
  opt.seed = cfg.seed;
  opt.max_escape = cfg.max_escape;
  const DshReport rep = dsh_experiment(mu, ws.map(), phi, psi, alpha, cfg.dsh_lags, EstimatorKind::direct, opt,
                                       cfg.noise_multiplier);
  write_text(dir / "dsh.csv", dsh_csv(rep));
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(dsh_json(rep));
  j["tails"] = tails;
  write_text(dir / "dsh.json", j.dump(2) + "\n");
  out << dsh_csv(rep) << "alpha " << format_real(alpha) << " all_within " << (rep.all_within() ? "yes" : "no") << "\n";
  return 0;
}

int cmd_calibrate(Workspace& ws, std::ostream& out) {
  const Calibration& c = ws.calibration();
  nlohmann::ordered_json j;
  j["kappa"] = c.kappa;
  j["analytic_kappa"] = kAnalyticKappa;
  j["calibration_mass"] = c.calibration_mass();
  j["extrapolated_sum"] = c.extrapolated_sum;
  for (const auto& b : c.boxes) j["boxes"].push_back({{"radius", b.radius}, {"sum", b.sum}});
  write_text(fs::path(ws.config().out) / "calibration.json", j.dump(2) + "\n");
  out << "kappa " << format_real(c.kappa) << " analytic " << format_real(kAnalyticKappa) << " mass "
      << format_real(c.calibration_mass()) << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Numerical lab for Henon-Sibony maps on C^2"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir, cache_dir;
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON experiment config");
  app.add_option("--threads", threads, "worker cap (0 = all cores)");
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--cache", cache_dir, "cache directory (default <out>/cache)");

  RenderOptions ropt;
  std::string set = "plus", render_file;
  auto* render = app.add_subcommand("render-julia", "escape-time PGM of a slice of K+ or K-");
  render->add_option("--slice", ropt.slice, "w=<c> or z=<c>");
  render->add_option("--res", ropt.resolution, "image size");
  render->add_option("--radius", ropt.radius, "half-width of the square");
  render->add_option("--n-max", ropt.n_max, "iteration cap");
  render->add_option("--set", set, "plus (K+) or minus (K-)");
  render->add_option("--file", render_file, "output name inside --out");

  std::string green_map;
  std::vector<std::string> points;
  auto* green = app.add_subcommand("green", "evaluate G+ and G- at points");
  green->add_option("--map", green_map, "reference or square (default: the config map)");
  green->add_option("--point", points, "x1,y1,x2,y2")->allow_extra_args(false);

  auto* build = app.add_subcommand("build-measure", "Green fields to measure cache");
  auto* verify = app.add_subcommand("verify", "identity and positivity suites");
  auto* correlate = app.add_subcommand("correlate", "correlation series and decay fit");
  auto* dsh = app.add_subcommand("dsh", "truncation experiment for unbounded observables");
  auto* calib = app.add_subcommand("calibrate", "Fubini-Study wedge constant");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::ParseError& e) {
      throw ConfigError(e.what());
    }
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out = out_dir;
    if (!cache_dir.empty()) cfg.cache = cache_dir;
    set_thread_count(threads);
    Workspace ws(cfg, &err);

    if (*render) {
      if (set != "plus" && set != "minus") throw ConfigError("--set must be plus or minus");
      ropt.direction = set == "plus" ? Direction::forward : Direction::backward;
      const auto px = render_julia(ws.map(), ropt);
      const fs::path file = fs::path(cfg.out) / (render_file.empty() ? "julia_" + set + ".pgm" : render_file);
      write_pgm(file, ropt.resolution, ropt.resolution, px);
      out << file.string() << "\n";
      return 0;
    }
    if (*green) return cmd_green(cfg, green_map, points, out);
    if (*build) return cmd_build_measure(ws, out);
    if (*verify) return cmd_verify(cfg, out);
    if (*correlate) return cmd_correlate(ws, out);
    if (*dsh) return cmd_dsh(ws, out);
    if (*calib) return cmd_calibrate(ws, out);
    return 0;
  } catch (const ConfigError& e) {
    err << "E:config: " << e.what() << "\n";
    return 2;
  } catch (const VerificationFailure& e) {
    err << "E:verify: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    err << "E:numeric: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "E:error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace henon
