#pragma once

// Split-conformal p-values and the matching quantile threshold.
//
// p-values are kept as exact fractions count / (N + 1). Rejection and the
// quantile index both go through rejection_limit(), so
//     reject(p, alpha)  <=>  test_score > quantile_threshold(cal, alpha).value
// holds exactly, ties included.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace codcal {

using Label = std::uint8_t;
inline constexpr Label kInlier = 0;
inline constexpr Label kOutlier = 1;

/// Calibration scores with optional ground-truth labels (0 inlier, 1 outlier).
struct ScoreSet {
  std::vector<double> scores;
  std::optional<std::vector<Label>> labels;

  std::size_t size() const noexcept { return scores.size(); }
  bool has_labels() const noexcept { return labels.has_value(); }

  /// Throws InvalidArgument if a score is non-finite, label length differs,
  /// or a label is outside {0, 1}.
  void validate() const;

  /// Rows `indices` of this set, labels carried along when present.
  ScoreSet subset(std::span<const std::size_t> indices) const;
};

struct PValue {
  std::size_t count = 1;        // 1 + #{cal >= test}
  std::size_t denominator = 1;  // N + 1

  double value() const noexcept {
    return static_cast<double>(count) / static_cast<double>(denominator);
  }
  /// "count/denominator"
  std::string fraction() const;

  friend bool operator==(const PValue&, const PValue&) = default;
};

inline constexpr double kInfiniteScore = std::numeric_limits<double>::infinity();

struct QuantileThreshold {
  double value = kInfiniteScore;  // +inf when index == N + 1
  std::size_t index = 1;          // 1-based rank in cal ∪ {+inf}
  bool is_infinite() const noexcept { return value == kInfiniteScore; }
};

/// Largest count k with k / denominator <= alpha: floor(alpha * denominator).
/// A product within 1e-9 (relative) of an integer counts as that integer, so
/// decimal alphas such as 0.29 keep their exact boundary.
std::size_t rejection_limit(double alpha, std::size_t denominator) noexcept;

PValue conformal_p_value(const ScoreSet& cal, double test_score);
PValue conformal_p_value(std::span<const double> cal_scores, double test_score);

QuantileThreshold quantile_threshold(const ScoreSet& cal, double alpha);
QuantileThreshold quantile_threshold(std::span<const double> cal_scores, double alpha);

bool reject(const PValue& p, double alpha) noexcept;

/// Sorted copy of a calibration set for O(log N) p-values against many test points.
class SortedCalibration {
 public:
  explicit SortedCalibration(std::span<const double> cal_scores);

  std::size_t size() const noexcept { return sorted_.size(); }
  PValue p_value(double test_score) const;
  std::vector<PValue> p_values(std::span<const double> test_scores) const;
  QuantileThreshold threshold(double alpha) const;
  const std::vector<double>& sorted() const noexcept { return sorted_; }

 private:
  std::vector<double> sorted_;
};

/// scores[i] + epsilon * U_i, U_i ~ Uniform[0,1) drawn in index order from Rng(seed).
std::vector<double> jitter_scores(std::span<const double> scores, double epsilon, std::uint64_t seed);

/// 1e-9 * (max - min), floored at 1e-12.
double default_jitter_epsilon(std::span<const double> scores) noexcept;

}  // namespace codcal
