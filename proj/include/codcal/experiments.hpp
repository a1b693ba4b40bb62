#pragma once

// Seeded Monte-Carlo harness comparing five calibration methods on shared
// scores: Standard, Oracle, Naive-Trim, Small-Clean and Label-Trim.
//
// Every trial is a pure function of (config, trial index): the trial seed is
// derive_seed(master_seed, trial index) and each stochastic step inside a
// trial draws from its own sub-stream of that seed. Trials therefore run in
// any order and on any number of threads with identical results.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "codcal/conformal.hpp"
#include "codcal/dataio.hpp"
#include "codcal/scoring.hpp"

namespace codcal {

enum class Method { standard, oracle, naive_trim, small_clean, label_trim };

inline constexpr Method kAllMethods[] = {Method::standard, Method::oracle, Method::naive_trim,
                                         Method::small_clean, Method::label_trim};

std::string_view method_name(Method m) noexcept;
std::optional<Method> parse_method(std::string_view name) noexcept;

struct ScorerSpec {
  Scorer::Kind kind = Scorer::Kind::mahalanobis;
  std::size_t k = 5;    // knn
  double ridge = 1e-6;  // mahalanobis
};

Scorer fit_scorer(const ScorerSpec& spec, const FeatureMatrix& train);

/// Fresh Gaussian pools per trial. Pool sizes of 0 mean "just enough".
struct GaussianSource {
  std::size_t dim = 2;
  double shift = 3.0;
  double scale = 1.0;
  std::size_t inlier_pool = 0;
  std::size_t outlier_pool = 0;
};

/// Fixed pools loaded once from a labelled CSV; trials resample splits.
struct CsvSource {
  std::string path;
  std::string label_column = "label";
};

using DataSource = std::variant<GaussianSource, CsvSource>;

/// Removal count for Naive-Trim: round(r * n) when match_rate, else `fixed`.
struct NaiveTrimRule {
  bool match_rate = true;
  std::size_t fixed = 0;
};

struct ExperimentConfig {
  SplitSpec split;  // split.seed is ignored; trials derive their own
  std::vector<double> alphas{0.02};
  std::size_t budget = 50;
  NaiveTrimRule naive_trim;
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  std::size_t trials = 100;
  std::uint64_t master_seed = 0;
  ScorerSpec scorer;
  DataSource data = GaussianSource{};
  bool jitter = true;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
  std::size_t naive_trim_count() const noexcept;
};

/// One method at one alpha within one trial.
struct MethodMetrics {
  double type_i_error = 0.0;
  double power = 0.0;
  std::size_t trimmed_outliers = 0;  // calibration outliers discarded by the method
  std::size_t trimmed_inliers = 0;   // calibration inliers discarded by trimming
  std::size_t calibration_size = 0;  // size of the reference set actually used
  std::size_t remaining_outliers = 0;
  double outlier_cdf_at_quantile = 0.0;  // F1 of remaining outliers at the method's quantile
  double bound_term = 0.0;               // remaining/(n0+1) * ((1-alpha) - cdf)
};

struct TrialMetrics {
  std::size_t trial_index = 0;
  std::uint64_t trial_seed = 0;
  std::size_t n0 = 0;  // calibration inliers
  std::size_t n1 = 0;  // calibration outliers
  std::vector<Method> methods;
  std::vector<double> alphas;
  std::vector<MethodMetrics> cells;          // methods x alphas, row-major
  std::vector<std::uint64_t> score_digest;   // per method: digest of the scores it consumed

  const MethodMetrics& at(std::size_t method_pos, std::size_t alpha_pos) const {
    return cells[method_pos * alphas.size() + alpha_pos];
  }
  const MethodMetrics& at(Method m, double alpha) const;
};

struct Stat {
  double mean = 0.0;
  double se = 0.0;
};

/// Mean and standard error (sample sd / sqrt(n)); se = 0 when n < 2.
Stat mean_and_se(std::span<const double> values);

struct AggregateCell {
  Method method = Method::standard;
  double alpha = 0.0;
  Stat type_i_error, power, trimmed_outliers, trimmed_inliers, calibration_size,
      remaining_outliers, outlier_cdf_at_quantile, bound_term;
};

struct AggregateMetrics {
  std::size_t trials = 0;
  bool se_defined = false;  // false when trials == 1
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  std::vector<AggregateCell> cells;  // methods x alphas, row-major

  const AggregateCell& cell(Method m, double alpha) const;
};

/// Fraction of p-values <= alpha. Throws InvalidArgument on empty input.
double type_i_error(std::span<const PValue> inlier_p_values, double alpha);
double power(std::span<const PValue> outlier_p_values, double alpha);

/// Trial-invariant state (loaded CSV pools, ranking scorer) built once per config.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig& config() const noexcept { return config_; }
  TrialMetrics run_trial(std::size_t trial_index) const;

 private:
  struct Pools {
    LabeledDataset inliers;
    LabeledDataset outliers;
  };
  Pools trial_pools(std::uint64_t trial_seed) const;

  ExperimentConfig config_;
  std::optional<Pools> fixed_pools_;
  std::vector<double> fixed_outlier_scores_;
  std::optional<Scorer> ranking_scorer_;
};

TrialMetrics run_trial(const ExperimentConfig& config, std::size_t trial_index);

/// Trials in order, trial-index-ordered reduction. Identical output for every
/// `workers` value; 0 means the OpenMP default. Throws TrialError.
AggregateMetrics run_monte_carlo(const ExperimentConfig& config, unsigned workers = 0);

/// Single-threaded reference for run_monte_carlo.
AggregateMetrics run_monte_carlo_serial(const ExperimentConfig& config);

AggregateMetrics aggregate(std::span<const TrialMetrics> trials);

enum class SweepAxis { contamination_rate, budget, alpha };

std::string_view axis_name(SweepAxis axis) noexcept;
std::optional<SweepAxis> parse_axis(std::string_view name) noexcept;

/// Config for one sweep point: the axis field set to `value` and the master
/// seed re-keyed by (axis, value). Throws InvalidArgument if out of domain.
ExperimentConfig sweep_point_config(const ExperimentConfig& base, SweepAxis axis, double value);

struct SweepPoint {
  std::string axis = "none";
  double value = 0.0;
  AggregateMetrics metrics;
};

std::vector<AggregateMetrics> sweep(const ExperimentConfig& base, SweepAxis axis,
                                    std::span<const double> values, unsigned workers = 0);

struct ReportOptions {
  std::string config_hash;
  std::uint64_t master_seed = 0;
  bool relative_power = false;  // adds power relative to Standard
};

/// One row per (sweep point, method, alpha); mean and SE column per metric.
void write_results_csv(std::ostream& out, std::span<const SweepPoint> points,
                       const ReportOptions& options);
void write_results_json(std::ostream& out, std::span<const SweepPoint> points,
                        const ReportOptions& options);

}  // namespace codcal
