#pragma once

// Black-box nonconformity scorers. Larger score = more outlier-like.
//
// Two concrete models are provided: mean distance to the k nearest training
// points (brute force) and Mahalanobis distance to the training mean. Both
// are immutable once fitted and safe to share between threads.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <variant>
#include <vector>

namespace codcal {

/// Row-major n x d block of feature vectors sharing one dimension.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t dim) : dim_(dim) {}
  FeatureMatrix(std::size_t dim, std::vector<double> values);
  FeatureMatrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return dim_ == 0 ? 0 : values_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return values_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  void append(std::span<const double> x);
  void reserve(std::size_t rows) { values_.reserve(rows * dim_); }

  const std::vector<double>& values() const noexcept { return values_; }

  /// Subset of rows in the given order.
  FeatureMatrix select(std::span<const std::size_t> indices) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

struct KnnState {
  FeatureMatrix reference;
  std::size_t k = 1;
};

struct MahalanobisState {
  std::vector<double> mean;
  std::vector<double> inverse_covariance;  // d x d, row-major, symmetric PSD
};

class Scorer {
 public:
  enum class Kind { knn, mahalanobis };

  explicit Scorer(KnnState state) : state_(std::move(state)) {}
  explicit Scorer(MahalanobisState state) : state_(std::move(state)) {}

  Kind kind() const noexcept {
    return std::holds_alternative<KnnState>(state_) ? Kind::knn : Kind::mahalanobis;
  }
  std::size_t dim() const noexcept;

  /// Score of one point. Throws InvalidArgument on dimension mismatch.
  double score(std::span<const double> x) const;

  const std::variant<KnnState, MahalanobisState>& state() const noexcept { return state_; }

 private:
  std::variant<KnnState, MahalanobisState> state_;
};

/// Requires 1 <= k <= |train|.
Scorer fit_knn_scorer(const FeatureMatrix& train, std::size_t k);

/// ML covariance (1/n) plus ridge * I. Requires |train| >= 2; throws
/// NumericalFailure when the regularised covariance is singular.
Scorer fit_mahalanobis_scorer(const FeatureMatrix& train, double ridge);

/// OpenMP-parallel over query rows. Bit-identical to score_batch_serial.
std::vector<double> score_batch(const Scorer& scorer, const FeatureMatrix& xs);

/// Single-threaded reference kernel.
std::vector<double> score_batch_serial(const Scorer& scorer, const FeatureMatrix& xs);

}  // namespace codcal
