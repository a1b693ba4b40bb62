#include "codcal/conformal.hpp"

#include <algorithm>
#include <cmath>

#include "codcal/error.hpp"
#include "codcal/rng.hpp"

namespace codcal {

namespace {

void check_test_score(double t) {
  if (!std::isfinite(t)) throw InvalidArgument("conformal_p_value: non-finite test score");
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
}

QuantileThreshold threshold_from_sorted(std::span<const double> sorted, double alpha) {
  const std::size_t denom = sorted.size() + 1;
  const std::size_t limit = rejection_limit(alpha, denom);
  QuantileThreshold q;
  q.index = limit >= denom ? 1 : denom - limit;
  q.value = q.index > sorted.size() ? kInfiniteScore : sorted[q.index - 1];
  return q;
}

}  // namespace

void ScoreSet::validate() const {
  for (double s : scores) {
    if (!std::isfinite(s)) throw InvalidArgument("ScoreSet: non-finite score");
  }
  if (labels) {
    if (labels->size() != scores.size()) throw InvalidArgument("ScoreSet: label count mismatch");
    for (Label l : *labels) {
      if (l > kOutlier) throw InvalidArgument("ScoreSet: label outside {0,1}");
    }
  }
}

ScoreSet ScoreSet::subset(std::span<const std::size_t> indices) const {
  ScoreSet out;
  out.scores.reserve(indices.size());
  for (std::size_t i : indices) out.scores.push_back(scores[i]);
  if (labels) {
    std::vector<Label> l;
    l.reserve(indices.size());
    for (std::size_t i : indices) l.push_back((*labels)[i]);
    out.labels = std::move(l);
  }
  return out;
}

std::string PValue::fraction() const {
  return std::to_string(count) + "/" + std::to_string(denominator);
}

std::size_t rejection_limit(double alpha, std::size_t denominator) noexcept {
  if (!(alpha > 0.0)) return 0;
  const double product = alpha * static_cast<double>(denominator);
  if (product >= static_cast<double>(denominator)) return denominator;
  // alpha is read as the decimal the caller wrote: 0.29 * 100 lands at
  // 28.999999999999996 but means 29.
  const double nearest = std::round(product);
  if (std::abs(product - nearest) <= 1e-9 * std::max(1.0, product)) {
    return static_cast<std::size_t>(nearest);
  }
  return static_cast<std::size_t>(std::floor(product));
}

PValue conformal_p_value(std::span<const double> cal_scores, double test_score) {
  check_test_score(test_score);
  std::size_t at_least = 0;
  for (double s : cal_scores) at_least += s >= test_score ? 1 : 0;
  return {1 + at_least, 1 + cal_scores.size()};
}

PValue conformal_p_value(const ScoreSet& cal, double test_score) {
  return conformal_p_value(std::span<const double>(cal.scores), test_score);
}

QuantileThreshold quantile_threshold(std::span<const double> cal_scores, double alpha) {
  check_alpha(alpha);
  std::vector<double> sorted(cal_scores.begin(), cal_scores.end());
  std::sort(sorted.begin(), sorted.end());
  return threshold_from_sorted(sorted, alpha);
}

QuantileThreshold quantile_threshold(const ScoreSet& cal, double alpha) {
  return quantile_threshold(std::span<const double>(cal.scores), alpha);
}

bool reject(const PValue& p, double alpha) noexcept {
  return p.count <= rejection_limit(alpha, p.denominator);
}

SortedCalibration::SortedCalibration(std::span<const double> cal_scores)
    : sorted_(cal_scores.begin(), cal_scores.end()) {
  std::sort(sorted_.begin(), sorted_.end());
}

PValue SortedCalibration::p_value(double test_score) const {
  check_test_score(test_score);
  const auto first_ge = std::lower_bound(sorted_.begin(), sorted_.end(), test_score);
  const auto at_least = static_cast<std::size_t>(sorted_.end() - first_ge);
  return {1 + at_least, 1 + sorted_.size()};
}

std::vector<PValue> SortedCalibration::p_values(std::span<const double> test_scores) const {
  std::vector<PValue> out;
  out.reserve(test_scores.size());
  for (double t : test_scores) out.push_back(p_value(t));
  return out;
}

QuantileThreshold SortedCalibration::threshold(double alpha) const {
  check_alpha(alpha);
  return threshold_from_sorted(sorted_, alpha);
}

std::vector<double> jitter_scores(std::span<const double> scores, double epsilon, std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw InvalidArgument("jitter_scores: epsilon must be positive");
  Rng rng(seed);
  std::vector<double> out(scores.begin(), scores.end());
  for (double& s : out) s += epsilon * rng.uniform();
  return out;
}

double default_jitter_epsilon(std::span<const double> scores) noexcept {
  if (scores.empty()) return 1e-12;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  return std::max(1e-9 * (*hi - *lo), 1e-12);
}

}  // namespace codcal
