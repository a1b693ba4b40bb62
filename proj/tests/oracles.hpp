#pragma once

// Test-only reference implementations. These follow the textbook definitions
// directly (full sorts, explicit enumeration, exact rationals) and share no
// code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

/// (1 + #{s >= t}) and (1 + n), by enumeration.
inline std::pair<std::size_t, std::size_t> p_value(const std::vector<double>& cal, double t) {
  std::size_t c = 1;
  for (double s : cal)
    if (!(s < t)) ++c;
  return {c, cal.size() + 1};
}

/// k-th smallest (1-based) of cal ∪ {+inf}, via a full sort.
inline double kth_with_sentinel(std::vector<double> cal, std::size_t k) {
  cal.push_back(std::numeric_limits<double>::infinity());
  std::sort(cal.begin(), cal.end());
  return cal[k - 1];
}

/// Exact k/(n) <= a for a given as an integer ratio a_num/a_den.
inline bool rational_leq(std::size_t k, std::size_t n, std::size_t a_num, std::size_t a_den) {
  return k * a_den <= a_num * n;
}

/// Brute-force Label-Trim: full ascending stable sort by (score, index),
/// annotate the last min(m, n), drop those labelled 1.
struct TrimTrace {
  std::vector<std::size_t> annotated;  // sorted ascending by index
  std::vector<std::size_t> kept;       // ascending index order
};

inline TrimTrace label_trim(const std::vector<double>& scores, const std::vector<int>& labels, std::size_t m) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  const std::size_t take = std::min(m, n);
  TrimTrace t;
  std::vector<bool> drop(n, false);
  for (std::size_t i = n - take; i < n; ++i) {
    t.annotated.push_back(order[i]);
    if (labels[order[i]] == 1) drop[order[i]] = true;
  }
  std::sort(t.annotated.begin(), t.annotated.end());
  for (std::size_t i = 0; i < n; ++i)
    if (!drop[i]) t.kept.push_back(i);
  return t;
}

/// Mean of the k smallest Euclidean distances, by full sort.
inline double knn(const std::vector<std::vector<double>>& train, const std::vector<double>& x, std::size_t k) {
  std::vector<double> d;
  for (const auto& r : train) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) acc += (x[j] - r[j]) * (x[j] - r[j]);
    d.push_back(std::sqrt(acc));
  }
  std::sort(d.begin(), d.end());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += d[i];
  return s / static_cast<double>(k);
}

}  // namespace oracle
