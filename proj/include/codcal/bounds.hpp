#pragma once

// Closed-form type-I error bounds for conformal outlier detection with a
// contaminated calibration set. Expectations in the bounds are supplied by
// the caller, either as a single trial's value or as a Monte-Carlo mean.

#include <cstddef>
#include <span>
#include <utility>

namespace codcal {

/// Fraction of `scores` that are <= t. 1 for t = +inf, 0 for empty input.
double empirical_cdf(std::span<const double> scores, double t) noexcept;

/// Clean-calibration type-I interval: (max(0, alpha - 1/(n+1)), alpha).
std::pair<double, double> oracle_interval(std::size_t n, double alpha) noexcept;

/// alpha - n1/(n0+1) * (1 - alpha - cdf_at_quantile)
/// for a calibration set of n0 inliers and n1 outliers, where cdf_at_quantile
/// is E[F1(Q)] (outlier empirical CDF at the calibration quantile).
double lemma_bound(double alpha, std::size_t n0, std::size_t n1, double cdf_at_quantile) noexcept;

/// Bracketed expectation term of the Label-Trim bound for one trial:
/// remaining_outliers/(n0+1) * ((1 - alpha) - cdf_at_quantile).
double lt_bound_term(double alpha, std::size_t n0, double remaining_outliers,
                     double cdf_at_quantile) noexcept;

/// alpha + 1/(n0+1) - lt_bound_term(alpha, n0, lt_outlier_count, cdf_at_quantile).
/// Pass averaged inputs to evaluate at Monte-Carlo means.
double theorem_lt_bound(double alpha, std::size_t n0, double lt_outlier_count,
                        double cdf_at_quantile) noexcept;

/// Same bound with the expectation supplied directly (mean of lt_bound_term).
double theorem_lt_bound_from_term(double alpha, std::size_t n0, double mean_term) noexcept;

/// Mixture-contamination bound: alpha - delta * E[F0(Q) - F1(Q)].
double mixture_bound(double alpha, double delta, double f0_minus_f1) noexcept;

}  // namespace codcal
