#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "codcal/conformal.hpp"
#include "codcal/error.hpp"
#include "codcal/rng.hpp"
#include "oracles.hpp"

using namespace codcal;

namespace {
std::vector<double> random_distinct(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}
}  // namespace

TEST_CASE("p-value worked examples") {
  const std::vector<double> cal{1.0, 2.0, 3.0};
  const PValue a = conformal_p_value(cal, 2.5);
  CHECK(a.count == 2);
  CHECK(a.denominator == 4);
  CHECK(a.value() == 0.5);
  CHECK(conformal_p_value(cal, 0.0).value() == 1.0);
  CHECK(conformal_p_value(std::vector<double>{}, 7.0).value() == 1.0);
  CHECK(conformal_p_value(std::vector<double>{}, 7.0).fraction() == "1/1");
  CHECK(a.fraction() == "2/4");
}

TEST_CASE("p-value rejects non-finite test scores") {
  const std::vector<double> cal{1.0};
  CHECK_THROWS_AS(conformal_p_value(cal, std::nan("")), InvalidArgument);
  CHECK_THROWS_AS(conformal_p_value(cal, std::numeric_limits<double>::infinity()), InvalidArgument);
}

TEST_CASE("quantile threshold worked examples") {
  const std::vector<double> cal{1.0, 2.0, 3.0};
  const auto q = quantile_threshold(cal, 0.5);
  CHECK(q.index == 2);
  CHECK(q.value == 2.0);
  const auto hi = quantile_threshold(cal, 0.01);
  CHECK(hi.index == 4);
  CHECK(hi.is_infinite());
  CHECK(quantile_threshold(std::vector<double>{}, 0.3).is_infinite());
  CHECK_THROWS_AS(quantile_threshold(cal, 0.0), InvalidArgument);
  CHECK_THROWS_AS(quantile_threshold(cal, 1.0), InvalidArgument);
}

TEST_CASE("reject is inclusive at the boundary") {
  CHECK(reject(PValue{1, 2}, 0.5));
  CHECK_FALSE(reject(PValue{2, 100}, 0.01));
  CHECK(reject(PValue{1, 201}, 0.01));
  // 2/101 <= 0.02 exactly; 3/101 is not.
  CHECK(reject(PValue{2, 101}, 0.02));
  CHECK_FALSE(reject(PValue{3, 101}, 0.02));
}

TEST_CASE("rejection_limit agrees with exact rationals on a two-digit grid") {
  for (std::size_t d = 1; d <= 300; ++d) {
    for (std::size_t a = 1; a <= 99; ++a) {
      const std::size_t lim = rejection_limit(static_cast<double>(a) / 100.0, d);
      CHECK(oracle::rational_leq(lim, d, a, 100));
      CHECK_FALSE(oracle::rational_leq(lim + 1, d, a, 100));
    }
  }
}

TEST_CASE("p-value and quantile match enumeration oracles") {
  Rng rng(101);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = rng.below(40);
    auto cal = random_distinct(rng, n);
    for (int j = 0; j < 5; ++j) {
      const double t = rng.normal();
      const auto [c, d] = oracle::p_value(cal, t);
      const PValue p = conformal_p_value(cal, t);
      CHECK(p.count == c);
      CHECK(p.denominator == d);
    }
    for (std::size_t a = 1; a <= 99; a += 7) {
      const double alpha = static_cast<double>(a) / 100.0;
      // ceil((1 - alpha)(n+1)) in exact integer arithmetic.
      const std::size_t idx = ((100 - a) * (n + 1) + 99) / 100;
      const auto q = quantile_threshold(cal, alpha);
      CHECK(q.index == idx);
      CHECK(q.value == oracle::kth_with_sentinel(cal, idx));
    }
  }
}

TEST_CASE("p-value <= alpha iff test exceeds the quantile threshold") {
  Rng rng(202);
  std::size_t checks = 0;
  for (int rep = 0; rep < 200; ++rep) {
    auto cal = random_distinct(rng, rng.below(51));
    const SortedCalibration sc(cal);
    for (int j = 0; j < 10; ++j) {
      const double t = rng.normal();
      for (int a = 1; a <= 99; ++a) {
        const double alpha = a / 100.0;
        const bool by_p = reject(sc.p_value(t), alpha);
        const bool by_q = t > sc.threshold(alpha).value;
        CHECK(by_p == by_q);
        CHECK(by_p == reject(conformal_p_value(cal, t), alpha));
        ++checks;
      }
    }
  }
  CHECK(checks == 200u * 10u * 99u);
}

TEST_CASE("quantile monotonicity against the augmented set") {
  Rng rng(303);
  for (int rep = 0; rep < 300; ++rep) {
    auto cal = random_distinct(rng, rng.below(30));
    const double t = rng.normal() * 2.0;
    for (int a = 1; a <= 99; a += 3) {
      const auto q = quantile_threshold(cal, a / 100.0);
      std::vector<double> aug = cal;
      aug.push_back(t);
      std::sort(aug.begin(), aug.end());
      if (q.index <= aug.size()) CHECK(q.value >= aug[q.index - 1]);
    }
  }
}

TEST_CASE("granularity and monotonicity under added scores") {
  Rng rng(404);
  for (int rep = 0; rep < 200; ++rep) {
    auto cal = random_distinct(rng, rng.below(25));
    const double t = rng.normal();
    const PValue p = conformal_p_value(cal, t);
    CHECK(p.denominator == cal.size() + 1);
    CHECK(p.count >= 1);
    CHECK(p.count <= p.denominator);
    cal.push_back(t + 1.0);
    CHECK(conformal_p_value(cal, t).value() >= p.value());
  }
}

TEST_CASE("super-uniformity on exchangeable scores") {
  Rng rng(505);
  const std::size_t n = 49;
  const double alpha = 0.1;
  const int reps = 20000;
  int hits = 0;
  for (int r = 0; r < reps; ++r) {
    auto cal = random_distinct(rng, n);
    if (reject(conformal_p_value(cal, rng.normal()), alpha)) ++hits;
  }
  const double rate = static_cast<double>(hits) / reps;
  const double se = std::sqrt(alpha * (1 - alpha) / reps);
  CHECK(rate <= alpha + 3 * se);
  CHECK(rate >= alpha - 1.0 / (n + 1) - 3 * se);
}

TEST_CASE("jitter determinism and trace") {
  const std::vector<double> tied{1.0, 1.0, 1.0};
  const double eps = 1e-6;
  const auto a = jitter_scores(tied, eps, 77);
  const auto b = jitter_scores(tied, eps, 77);
  CHECK(a == b);
  Rng trace(77);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i] == 1.0 + eps * trace.uniform());
    CHECK(a[i] >= 1.0);
    CHECK(a[i] <= 1.0 + eps);
  }
  CHECK(a[0] != a[1]);
  CHECK(a[1] != a[2]);
  CHECK(a[0] != a[2]);

  const std::vector<double> distinct{0.0, 1.0, 2.0, 5.0};
  const auto j = jitter_scores(distinct, std::numeric_limits<double>::denorm_min(), 3);
  CHECK(std::is_sorted(j.begin(), j.end()));
  CHECK_THROWS_AS(jitter_scores(distinct, 0.0, 1), InvalidArgument);
}

TEST_CASE("default jitter epsilon") {
  CHECK(default_jitter_epsilon(std::vector<double>{0.0, 10.0}) == doctest::Approx(1e-8));
  CHECK(default_jitter_epsilon(std::vector<double>{2.0, 2.0}) == 1e-12);
  CHECK(default_jitter_epsilon(std::vector<double>{}) == 1e-12);
}

TEST_CASE("ScoreSet validation and subsets") {
  ScoreSet ok{{1.0, 2.0}, std::vector<Label>{0, 1}};
  CHECK_NOTHROW(ok.validate());
  const auto sub = ok.subset(std::vector<std::size_t>{1});
  CHECK(sub.scores == std::vector<double>{2.0});
  CHECK(sub.labels->at(0) == kOutlier);
  CHECK_THROWS_AS((ScoreSet{{1.0}, std::vector<Label>{0, 1}}.validate()), InvalidArgument);
  CHECK_THROWS_AS((ScoreSet{{1.0}, std::vector<Label>{2}}.validate()), InvalidArgument);
  CHECK_THROWS_AS((ScoreSet{{std::nan("")}, std::nullopt}.validate()), InvalidArgument);
}
