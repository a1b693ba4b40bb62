#include "codcal/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "codcal/error.hpp"

namespace codcal {

namespace {

void require_finite(std::span<const double> x, const char* what) {
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + ": non-finite feature value");
  }
}

double knn_score(const KnnState& s, std::span<const double> x, std::vector<double>& dist) {
  const std::size_t n = s.reference.rows();
  const std::size_t d = s.reference.dim();
  dist.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = s.reference.row(i).data();
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = x[j] - r[j];
      acc += diff * diff;
    }
    dist[i] = acc;
  }
  const auto k = static_cast<std::ptrdiff_t>(s.k);
  std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
  std::sort(dist.begin(), dist.begin() + k);
  double total = 0.0;
  for (std::ptrdiff_t i = 0; i < k; ++i) total += std::sqrt(dist[static_cast<std::size_t>(i)]);
  return total / static_cast<double>(s.k);
}

double mahalanobis_score(const MahalanobisState& s, std::span<const double> x) {
  const std::size_t d = s.mean.size();
  double q = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double di = x[i] - s.mean[i];
    double row = 0.0;
    for (std::size_t j = 0; j < d; ++j) row += s.inverse_covariance[i * d + j] * (x[j] - s.mean[j]);
    q += di * row;
  }
  // Rounding can push a PSD quadratic form a hair below zero.
  return std::sqrt(std::max(q, 0.0));
}

void check_dim(const Scorer& scorer, std::size_t dim) {
  if (dim != scorer.dim()) {
    throw InvalidArgument("dimension mismatch: scorer expects " + std::to_string(scorer.dim()) +
                          ", got " + std::to_string(dim));
  }
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t dim, std::vector<double> values)
    : dim_(dim), values_(std::move(values)) {
  if (dim_ == 0 || values_.size() % dim_ != 0) {
    throw InvalidArgument("FeatureMatrix: value count not a multiple of dimension");
  }
}

FeatureMatrix::FeatureMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  for (const auto& r : rows) {
    if (dim_ == 0) dim_ = r.size();
    append(std::span<const double>(r.begin(), r.size()));
  }
}

void FeatureMatrix::append(std::span<const double> x) {
  if (dim_ == 0) dim_ = x.size();
  if (x.size() != dim_ || dim_ == 0) {
    throw InvalidArgument("FeatureMatrix: row dimension " + std::to_string(x.size()) +
                          " does not match " + std::to_string(dim_));
  }
  values_.insert(values_.end(), x.begin(), x.end());
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> indices) const {
  FeatureMatrix out(dim_);
  out.reserve(indices.size());
  for (std::size_t i : indices) out.append(row(i));
  return out;
}

std::size_t Scorer::dim() const noexcept {
  if (const auto* knn = std::get_if<KnnState>(&state_)) return knn->reference.dim();
  return std::get<MahalanobisState>(state_).mean.size();
}

double Scorer::score(std::span<const double> x) const {
  check_dim(*this, x.size());
  require_finite(x, "score");
  if (const auto* knn = std::get_if<KnnState>(&state_)) {
    std::vector<double> dist;
    return knn_score(*knn, x, dist);
  }
  return mahalanobis_score(std::get<MahalanobisState>(state_), x);
}

Scorer fit_knn_scorer(const FeatureMatrix& train, std::size_t k) {
  if (train.rows() == 0) throw InvalidArgument("fit_knn_scorer: empty training set");
  if (k == 0 || k > train.rows()) {
    throw InvalidArgument("fit_knn_scorer: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(train.rows()) + "]");
  }
  require_finite(train.values(), "fit_knn_scorer");
  return Scorer(KnnState{train, k});
}

Scorer fit_mahalanobis_scorer(const FeatureMatrix& train, double ridge) {
  const std::size_t n = train.rows();
  const std::size_t d = train.dim();
  if (n < 2) throw InvalidArgument("fit_mahalanobis_scorer: need at least 2 training points");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw InvalidArgument("fit_mahalanobis_scorer: ridge must be finite and nonnegative");
  }
  require_finite(train.values(), "fit_mahalanobis_scorer");

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      train.values().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mu;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
  cov.diagonal().array() += ridge;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalFailure("covariance eigendecomposition failed");
  const Eigen::VectorXd lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.maxCoeff());
  if (lambda.minCoeff() <= 1e-12 * scale) {
    throw NumericalFailure("covariance is singular; increase ridge");
  }
  const Eigen::MatrixXd& v = eig.eigenvectors();
  Eigen::MatrixXd inv = v * lambda.cwiseInverse().asDiagonal() * v.transpose();
  inv = 0.5 * (inv + inv.transpose()).eval();

  MahalanobisState state;
  state.mean.assign(mu.data(), mu.data() + d);
  state.inverse_covariance.resize(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      state.inverse_covariance[i * d + j] = inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return Scorer(std::move(state));
}

std::vector<double> score_batch_serial(const Scorer& scorer, const FeatureMatrix& xs) {
  if (xs.rows() == 0) return {};
  check_dim(scorer, xs.dim());
  require_finite(xs.values(), "score_batch");
  std::vector<double> out(xs.rows());
  std::vector<double> scratch;
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    if (const auto* knn = std::get_if<KnnState>(&scorer.state())) {
      out[i] = knn_score(*knn, xs.row(i), scratch);
    } else {
      out[i] = mahalanobis_score(std::get<MahalanobisState>(scorer.state()), xs.row(i));
    }
  }
  return out;
}

std::vector<double> score_batch(const Scorer& scorer, const FeatureMatrix& xs) {
  if (xs.rows() == 0) return {};
  check_dim(scorer, xs.dim());
  require_finite(xs.values(), "score_batch");
  const auto n = static_cast<std::ptrdiff_t>(xs.rows());
  std::vector<double> out(xs.rows());

  if (const auto* knn = std::get_if<KnnState>(&scorer.state())) {
#pragma omp parallel
    {
      std::vector<double> scratch;
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto row = static_cast<std::size_t>(i);
        out[row] = knn_score(*knn, xs.row(row), scratch);
      }
    }
  } else {
    const auto& m = std::get<MahalanobisState>(scorer.state());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto row = static_cast<std::size_t>(i);
      out[row] = mahalanobis_score(m, xs.row(row));
    }
  }
  return out;
}

}  // namespace codcal
