#pragma once

#include <optional>
#include <string>
#include <vector>

#include "henonlab/measure.hpp"
#include "henonlab/observables.hpp"

namespace henon {

enum class EstimatorKind { direct, symmetric };
std::string to_string(EstimatorKind k);
EstimatorKind estimator_from_string(const std::string& s);

/// Points carrying the measure: cell centres with their masses, or
/// Monte Carlo draws with equal weights.
struct WeightedPoints {
  std::vector<Point2C> points;
  std::vector<double> weights;

  static WeightedPoints cells(const DiscreteMeasure& mu);
  static WeightedPoints monte_carlo(const DiscreteMeasure& mu, std::size_t count, std::uint64_t seed);
};

struct CorrelationOptions {
  std::size_t bootstrap = 100;  ///< Poisson(1) replicates over the points
  std::uint64_t seed = 1;
  double max_escape = 0.2;      ///< share of mass allowed to leave the box
  std::size_t monte_carlo = 0;  ///< 0: cell centres, else that many draws
};

struct CorrelationValue {
  double estimate = 0.0;
  double stderr_ = 0.0;
  double escaped = 0.0;  ///< mass share whose orbit left the box by depth n
  double mean_phi = 0.0, mean_psi = 0.0;
};

/// direct: sum m phi(f^n x) psi(x) - <phi><psi>;
/// symmetric: sum m phi(f^{n/2} x) psi(f^{-n/2} x) - <phi><psi>.
/// Throws NumericError when more than max_escape of the mass escapes.
CorrelationValue correlation(const DiscreteMeasure& mu, const HenonMap& map, const Observable& phi,
                             const Observable& psi, int n, EstimatorKind kind, const CorrelationOptions& opt = {});
/// Same on an explicit point set; the escape box is `box`. Never throws on escape.
CorrelationValue correlation_on(const WeightedPoints& pts, const GridGeometry& box, const HenonMap& map,
                                const Observable& phi, const Observable& psi, int n, EstimatorKind kind,
                                const CorrelationOptions& opt = {});

struct CorrelationSeries {
  std::vector<int> lags;
  std::vector<double> estimates;
  std::vector<double> stderrs;
  std::vector<double> escaped;
  std::vector<bool> usable;  ///< |C| >= multiplier * stderr, C != 0, escape within limit
  EstimatorKind kind = EstimatorKind::direct;
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;
  double noise_multiplier = 3.0;
};

/// Escape-dominated lags are kept in the series and marked unusable.
CorrelationSeries correlation_series(const DiscreteMeasure& mu, const HenonMap& map, const Observable& phi,
                                     const Observable& psi, const std::vector<int>& lags, EstimatorKind kind,
                                     const CorrelationOptions& opt = {}, double noise_multiplier = 3.0);
/// Recomputes the usable flags for another multiplier.
void mark_usable(CorrelationSeries& s, double noise_multiplier, double max_escape = 0.2);

struct DecayFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_lo = 0.0, slope_hi = 0.0;  ///< 95% bootstrap interval
  int window_first = 0, window_last = 0;  ///< lags
  std::size_t points = 0;
  double noise_floor = 0.0;  ///< largest multiplier * stderr inside the window
};

/// Least squares of log|C_n| against n over the maximal run of usable lags
/// starting at the first usable one.
DecayFit fit_decay(const CorrelationSeries& s, double noise_multiplier = 3.0, std::size_t bootstrap = 1000,
                   std::uint64_t seed = 1);

struct TailFit {
  enum class Verdict { fit, bounded, rejected } verdict = Verdict::rejected;
  double alpha = 0.0;
  double c = 0.0;
  double residual = 0.0;  ///< rms of log residuals over the fitted points
  std::vector<double> M_grid;
  std::vector<double> masses;  ///< mu{|obs| > M}
  std::size_t fitted = 0;
  bool admitted() const { return verdict == Verdict::fit; }
};

struct TailOptions {
  std::size_t monte_carlo = 0;  ///< 0: cell centres
  std::uint64_t seed = 1;
  double max_residual = 0.2;
  double min_mass = 0.0;  ///< tail masses at or below this are not fitted
};

TailFit moderate_tail(const DiscreteMeasure& mu, const Observable& obs, const std::vector<double>& M_grid,
                      const TailOptions& opt = {});

struct DshRow {
  int n = 0;
  double M = 0.0;
  double raw = 0.0, raw_stderr = 0.0;
  double bounded = 0.0;  ///< correlation of the truncated pair
  double phi_l1 = 0.0, phi_l2 = 0.0, psi_l1 = 0.0, psi_l2 = 0.0;
  double escaped = 0.0;
  double envelope = 0.0;
  bool usable = false;
  bool within = true;
};

struct DshReport {
  std::vector<DshRow> rows;
  double alpha = 0.0;
  long long degree = 2;
  double C0 = 0.0;
  std::optional<int> first_lag;
  bool all_within() const;
};

/// Truncates at M_n = n log d / alpha: phi_1 = max(phi, -M_n), phi_2 = phi - phi_1.
/// The envelope is C0 max(n,1)^2 d^{-n/2} with C0 set by the first usable lag.
DshReport dsh_experiment(const DiscreteMeasure& mu, const HenonMap& map, const Observable& phi, const Observable& psi,
                         double alpha, const std::vector<int>& lags, EstimatorKind kind = EstimatorKind::direct,
                         const CorrelationOptions& opt = {}, double noise_multiplier = 3.0);

/// "n,estimate,stderr,usable" with one row per lag.
std::string series_csv(const CorrelationSeries& s);
/// Fit summary; `fit` may be empty when no fit was possible.
std::string series_json(const CorrelationSeries& s, const std::optional<DecayFit>& fit, long long degree,
                        const std::string& note = {});
std::string dsh_csv(const DshReport& r);
std::string dsh_json(const DshReport& r);

}  // namespace henon
