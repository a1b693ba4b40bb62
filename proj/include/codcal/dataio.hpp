#pragma once

// Datasets: synthetic Gaussian mixtures, CSV ingestion, and the random
// train / calibration / test split with controlled outlier contamination.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "codcal/conformal.hpp"
#include "codcal/scoring.hpp"

namespace codcal {

struct LabeledDataset {
  FeatureMatrix points;
  std::vector<Label> labels;
  std::string name;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t outlier_count() const noexcept;
  /// Rows with the given label, as a new dataset.
  LabeledDataset with_label(Label label) const;
};

/// Inliers ~ N(0, I_d) then outliers ~ N(shift * 1_d, scale^2 I_d), in that order.
LabeledDataset gen_gaussian_mixture(std::size_t n_inlier, std::size_t n_outlier, std::size_t dim,
                                    double shift, double scale, std::uint64_t seed);

/// Header plus raw cells; no quoting. Throws IoError / ParseError.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header, or nullopt.
  std::optional<std::size_t> column(const std::string& name) const;
  /// Column parsed as finite doubles; ParseError names row and column.
  std::vector<double> numeric_column(std::size_t col) const;
};

CsvTable read_csv_table(const std::filesystem::path& path);

/// Features are all non-label columns in header order; labels must be 0 or 1.
LabeledDataset load_csv_dataset(const std::filesystem::path& path, const std::string& label_column);

/// Header x0..x{d-1},label; 17 significant digits.
void write_csv_dataset(const std::filesystem::path& path, const LabeledDataset& data);

/// Score-percentile band (lo, hi] of the outlier pool, 0 <= lo < hi <= 1.
struct PercentileBand {
  double lo = 0.0;
  double hi = 1.0;
};

struct IidInjection {};
/// Contaminating outliers restricted to scores <= the q-quantile of the pool.
struct PercentileInjection {
  double q = 1.0;
};
/// Train/cal outliers from one band, test outliers from another.
struct DriftInjection {
  PercentileBand train_cal{0.3, 1.0};
  PercentileBand test{0.0, 1.0};
};
using Injection = std::variant<IidInjection, PercentileInjection, DriftInjection>;

bool injection_needs_scores(const Injection& injection) noexcept;

struct SplitSpec {
  std::size_t train_size = 0;
  std::size_t cal_size = 0;
  std::size_t test_inlier_size = 0;
  std::size_t test_outlier_size = 0;
  double contamination_rate = 0.0;  // in [0, 1)
  Injection injection = IidInjection{};
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on out-of-domain fields.
  void validate() const;
};

/// round(r * size), half-up.
std::size_t contaminated_outlier_count(double rate, std::size_t size) noexcept;

/// 1-based rank ceil(q * n) of the lower empirical q-quantile, clamped to
/// [1, n]; q * n within 1e-9 of an integer counts as that integer.
std::size_t lower_quantile_rank(double q, std::size_t n) noexcept;

struct Splits {
  LabeledDataset train;
  LabeledDataset cal;  // labels kept for the annotation oracle only
  LabeledDataset test_inlier;
  LabeledDataset test_outlier;
  // Pool index of each row: inlier pool when the row's label is 0, outlier pool otherwise.
  std::vector<std::size_t> train_source, cal_source, test_inlier_source, test_outlier_source;
};

/// Disjoint random split. Each role draws from its own sub-stream
/// derive_seed(spec.seed, role). `outlier_pool_scores` ranks the outlier pool
/// and is required by percentile and drift injection.
Splits make_splits(const LabeledDataset& inlier_pool, const LabeledDataset& outlier_pool,
                   const SplitSpec& spec,
                   std::optional<std::span<const double>> outlier_pool_scores = std::nullopt);

/// Same, ranking the outlier pool with `scorer` when the injection needs it.
Splits make_splits(const LabeledDataset& inlier_pool, const LabeledDataset& outlier_pool,
                   const SplitSpec& spec, const Scorer* scorer_for_percentile);

}  // namespace codcal
