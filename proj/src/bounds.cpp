#include "codcal/bounds.hpp"

#include <algorithm>
#include <cmath>

namespace codcal {

double empirical_cdf(std::span<const double> scores, double t) noexcept {
  if (scores.empty()) return 0.0;
  if (t == INFINITY) return 1.0;
  const auto below = std::count_if(scores.begin(), scores.end(), [t](double s) { return s <= t; });
  return static_cast<double>(below) / static_cast<double>(scores.size());
}

std::pair<double, double> oracle_interval(std::size_t n, double alpha) noexcept {
  const double lower = alpha - 1.0 / (static_cast<double>(n) + 1.0);
  return {std::max(0.0, lower), alpha};
}

double lemma_bound(double alpha, std::size_t n0, std::size_t n1, double cdf_at_quantile) noexcept {
  const double weight = static_cast<double>(n1) / (static_cast<double>(n0) + 1.0);
  return alpha - weight * (1.0 - alpha - cdf_at_quantile);
}

double lt_bound_term(double alpha, std::size_t n0, double remaining_outliers,
                     double cdf_at_quantile) noexcept {
  if (remaining_outliers == 0.0) return 0.0;
  return remaining_outliers / (static_cast<double>(n0) + 1.0) * ((1.0 - alpha) - cdf_at_quantile);
}

double theorem_lt_bound_from_term(double alpha, std::size_t n0, double mean_term) noexcept {
  return alpha + 1.0 / (static_cast<double>(n0) + 1.0) - mean_term;
}

double theorem_lt_bound(double alpha, std::size_t n0, double lt_outlier_count,
                        double cdf_at_quantile) noexcept {
  return theorem_lt_bound_from_term(alpha, n0, lt_bound_term(alpha, n0, lt_outlier_count, cdf_at_quantile));
}

double mixture_bound(double alpha, double delta, double f0_minus_f1) noexcept {
  return alpha - delta * f0_minus_f1;
}

}  // namespace codcal
