#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "henonlab/measure.hpp"
#include "henonlab/mixing.hpp"
#include "henonlab/observables.hpp"

namespace henon {

/// Everything a run needs, read from one JSON file. Unknown keys anywhere are
/// a ConfigError; omitted keys keep the defaults below.
struct ExperimentConfig {
  int version = 1;
  std::string map_name = "reference";  ///< "reference", "square" or "custom"
  std::vector<ElementaryFactor> factors;  ///< used when map_name == "custom"

  double radius = 3.2;
  unsigned resolution = 48;
  double tol = 1e-9;
  double mollification = 2.0;  ///< in grid spacings
  std::string kappa = "analytic";  ///< "analytic", "calibrated" or a number
  double clip_ceiling = 0.05;

  double ext_radius = 8.0;
  unsigned ext_resolution = 40;
  double ext_mollification = 2.0;
  std::optional<double> ext_delta;  ///< empty: default_delta
  double ext_split = 0.5;

  std::string phi = "ext:trunc:5:log_dist:2.4,0,2.4,0";
  std::string psi = "ext:trunc:5:log_dist:-1.25,0,-1.25,0";
  std::vector<int> lags{0, 2, 4, 6, 8, 10, 12};
  EstimatorKind estimator = EstimatorKind::symmetric;
  std::size_t bootstrap = 100;
  double noise_multiplier = 3.0;
  double max_escape = 0.2;

  std::string dsh_phi = "log_dist:2.4,0,2.4,0";
  std::string dsh_psi = "log_dist:-1.25,0,-1.25,0";
  double dsh_guard = 10.0;  ///< truncation applied before extension
  std::vector<int> dsh_lags{0, 1, 2, 3, 4, 5, 6};
  std::vector<double> tail_grid{2, 2.5, 3, 3.5, 4, 4.5, 5};
  std::size_t tail_samples = 4000000;
  std::size_t tail_min_count = 25;  ///< fewer draws above M: not fitted
  double tail_max_residual = 0.2;

  std::uint64_t seed = 1;
  std::string out = "out";
  std::string cache;  ///< empty: <out>/cache

  HenonMap map() const;
  /// Canonical JSON of everything; equal configs give equal strings.
  std::string dump() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
HenonMap named_map(const std::string& name);

/// Lazily built fields, measure and extension data with an optional on-disk
/// cache keyed by the inputs that determine each artefact.
class Workspace {
 public:
  explicit Workspace(ExperimentConfig cfg, std::ostream* log = nullptr);

  const ExperimentConfig& config() const { return cfg_; }
  const HenonMap& map() const { return map_; }
  const GreenField& raw_field(Direction dir);  ///< forward or backward on the measure grid
  const DiscreteMeasure& measure();
  double kappa();
  const Calibration& calibration();

  const GreenField& ext_raw();        ///< combined G on the extension box
  const GreenField& ext_mollified();  ///< its mollification G_l
  const SublevelThresholds& ext_thresholds();
  /// G_l as multilinear interpolation of the grid (fast) or as the exact
  /// translate average (plurisubharmonic; slow).
  ExtensionContext extension_context(bool pointwise = false);
  Observable observable(const std::string& label, bool pointwise = false);

 private:
  std::filesystem::path cache_path(const std::string& kind, const std::string& key) const;
  void note(const std::string& s) const;

  ExperimentConfig cfg_;
  HenonMap map_;
  std::ostream* log_;
  std::unique_ptr<GreenField> plus_, minus_, ext_raw_, ext_moll_;
  std::unique_ptr<DiscreteMeasure> mu_;
  std::unique_ptr<Calibration> cal_;
  std::optional<SublevelThresholds> thresholds_;
};

/// PGM (binary P5) escape-time image of K+ or K- on a complex line.
struct RenderOptions {
  std::string slice = "w=0";  ///< "w=<c>" varies z1, "z=<c>" varies z2
  unsigned resolution = 512;
  double radius = 3.0;
  int n_max = 64;
  Direction direction = Direction::forward;
};
std::vector<unsigned char> render_julia(const HenonMap& map, const RenderOptions& opt);
void write_pgm(const std::filesystem::path& path, unsigned width, unsigned height,
               const std::vector<unsigned char>& pixels);

/// Shortest round-trip decimal, always with a '.' or exponent ("0.0", "1.5").
std::string format_real(double v);

/// Full command line driver. Returns 0 ok, 1 failure, 2 config error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace henon
