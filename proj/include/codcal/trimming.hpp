#pragma once

// Calibration-set cleaning strategies.
//
//   naive_trim   drop the m largest scores, no annotation
//   label_trim   annotate the m largest scores, drop only confirmed outliers
//   small_clean  annotate m random points, keep only confirmed inliers
//
// Candidate order for the "largest" selections is a stable ascending sort on
// (score, original index); among equal scores the higher index ranks larger.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "codcal/conformal.hpp"

namespace codcal {

/// Ground-truth label lookup standing in for a human annotator.
/// Implementations must be safe for concurrent const calls.
class LabelOracle {
 public:
  virtual ~LabelOracle() = default;
  virtual Label label(std::size_t index) const = 0;
};

/// Oracle backed by a stored label vector.
class StoredLabelOracle final : public LabelOracle {
 public:
  explicit StoredLabelOracle(std::vector<Label> labels) : labels_(std::move(labels)) {}
  Label label(std::size_t index) const override;

 private:
  std::vector<Label> labels_;
};

struct TrimOutcome {
  ScoreSet trimmed;                          // survivors, in original index order
  std::vector<std::size_t> kept_indices;     // original index of each survivor
  std::vector<std::size_t> annotated_indices;  // queried points, largest score first
  std::vector<std::size_t> removed_indices;    // annotated points labelled outlier
  std::size_t budget_used = 0;
};

/// Indices of the min(m, n) largest scores, largest first.
std::vector<std::size_t> top_m_indices(std::span<const double> scores, std::size_t m);

/// Throws InvalidArgument when m > |cal|.
ScoreSet naive_trim(const ScoreSet& cal, std::size_t m);

/// Labels on `cal` (if any) are carried through but never consulted; all
/// annotation goes through `oracle`. m > n is clamped to n.
TrimOutcome label_trim(const ScoreSet& cal, std::size_t m, const LabelOracle& oracle);

PValue label_trim_p_value(const TrimOutcome& outcome, double test_score);

/// m indices drawn uniformly without replacement from Rng(selection_seed);
/// returns the drawn points the oracle labels inlier, in draw order.
/// Throws InvalidArgument when m > |cal|.
ScoreSet small_clean(const ScoreSet& cal, std::size_t m, std::uint64_t selection_seed,
                     const LabelOracle& oracle);

/// m <= alpha * (n + 1)
bool budget_condition_holds(std::size_t m, std::size_t n, double alpha) noexcept;

}  // namespace codcal
