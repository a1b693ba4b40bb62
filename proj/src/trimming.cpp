#include "codcal/trimming.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "codcal/error.hpp"
#include "codcal/rng.hpp"

namespace codcal {

Label StoredLabelOracle::label(std::size_t index) const {
  if (index >= labels_.size()) {
    throw InvalidArgument("label oracle: index " + std::to_string(index) + " not covered");
  }
  return labels_[index];
}

std::vector<std::size_t> top_m_indices(std::span<const double> scores, std::size_t m) {
  const std::size_t n = scores.size();
  m = std::min(m, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Ascending by (score, index); index tiebreak makes this a total order.
  auto less = [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b] || (scores[a] == scores[b] && a < b);
  };
  const auto cut = order.begin() + static_cast<std::ptrdiff_t>(n - m);
  std::nth_element(order.begin(), cut, order.end(), less);
  std::vector<std::size_t> top(cut, order.end());
  std::sort(top.begin(), top.end(), [&](std::size_t a, std::size_t b) { return less(b, a); });
  return top;
}

ScoreSet naive_trim(const ScoreSet& cal, std::size_t m) {
  if (m > cal.size()) {
    throw InvalidArgument("naive_trim: m=" + std::to_string(m) + " exceeds calibration size " +
                          std::to_string(cal.size()));
  }
  std::vector<bool> drop(cal.size(), false);
  for (std::size_t i : top_m_indices(cal.scores, m)) drop[i] = true;
  std::vector<std::size_t> keep;
  keep.reserve(cal.size() - m);
  for (std::size_t i = 0; i < cal.size(); ++i)
    if (!drop[i]) keep.push_back(i);
  return cal.subset(keep);
}

TrimOutcome label_trim(const ScoreSet& cal, std::size_t m, const LabelOracle& oracle) {
  TrimOutcome out;
  out.annotated_indices = top_m_indices(cal.scores, m);
  out.budget_used = out.annotated_indices.size();

  std::vector<bool> removed(cal.size(), false);
  for (std::size_t i : out.annotated_indices) {
    if (oracle.label(i) == kOutlier) {
      removed[i] = true;
      out.removed_indices.push_back(i);
    }
  }
  out.kept_indices.reserve(cal.size() - out.removed_indices.size());
  for (std::size_t i = 0; i < cal.size(); ++i)
    if (!removed[i]) out.kept_indices.push_back(i);
  out.trimmed = cal.subset(out.kept_indices);
  return out;
}

PValue label_trim_p_value(const TrimOutcome& outcome, double test_score) {
  return conformal_p_value(outcome.trimmed, test_score);
}

ScoreSet small_clean(const ScoreSet& cal, std::size_t m, std::uint64_t selection_seed,
                     const LabelOracle& oracle) {
  if (m > cal.size()) {
    throw InvalidArgument("small_clean: m=" + std::to_string(m) + " exceeds calibration size " +
                          std::to_string(cal.size()));
  }
  Rng rng(selection_seed);
  std::vector<std::size_t> keep;
  for (std::size_t i : rng.sample_without_replacement(cal.size(), m)) {
    if (oracle.label(i) == kInlier) keep.push_back(i);
  }
  return cal.subset(keep);
}

bool budget_condition_holds(std::size_t m, std::size_t n, double alpha) noexcept {
  return static_cast<double>(m) <= alpha * (static_cast<double>(n) + 1.0);
}

}  // namespace codcal
