#include "doctest.h"

#include <algorithm>
#include <set>
#include <vector>

#include "codcal/conformal.hpp"
#include "codcal/error.hpp"
#include "codcal/rng.hpp"
#include "codcal/trimming.hpp"
#include "oracles.hpp"

using namespace codcal;

namespace {
std::vector<std::size_t> sorted_copy(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}
}  // namespace

TEST_CASE("naive trim examples") {
  const ScoreSet cal{{1, 2, 3, 4, 5}, std::nullopt};
  CHECK(naive_trim(cal, 2).scores == std::vector<double>{1, 2, 3});
  CHECK(naive_trim(cal, 0).scores == cal.scores);
  CHECK(naive_trim(ScoreSet{{1, 2}, std::nullopt}, 2).scores.empty());
  CHECK_THROWS_AS(naive_trim(cal, 6), InvalidArgument);
}

TEST_CASE("label trim hand trace") {
  const ScoreSet cal{{1, 2, 3, 4, 5}, std::nullopt};
  const StoredLabelOracle oracle({0, 0, 0, 1, 0});
  const TrimOutcome out = label_trim(cal, 2, oracle);
  CHECK(out.annotated_indices == std::vector<std::size_t>{4, 3});
  CHECK(out.removed_indices == std::vector<std::size_t>{3});
  CHECK(out.trimmed.scores == std::vector<double>{1, 2, 3, 5});
  CHECK(out.kept_indices == std::vector<std::size_t>{0, 1, 2, 4});
  CHECK(out.budget_used == 2);

  const PValue p = label_trim_p_value(out, 4.5);
  CHECK(p.count == 2);
  CHECK(p.denominator == 5);
  CHECK(p.value() == doctest::Approx(0.4));
}

TEST_CASE("label trim degenerate budgets") {
  const ScoreSet cal{{3, 1, 4, 1.5, 9, 2.6}, std::nullopt};
  const StoredLabelOracle mixed({0, 0, 1, 0, 1, 0});

  const TrimOutcome none = label_trim(cal, 0, mixed);
  CHECK(none.annotated_indices.empty());
  CHECK(none.trimmed.scores == cal.scores);
  for (double t : {0.0, 2.0, 3.5, 10.0}) CHECK(label_trim_p_value(none, t) == conformal_p_value(cal, t));

  const TrimOutcome all = label_trim(cal, 100, mixed);
  CHECK(all.budget_used == cal.size());
  CHECK(all.trimmed.scores == std::vector<double>{3, 1, 1.5, 2.6});

  const TrimOutcome empty = label_trim(cal, 6, StoredLabelOracle({1, 1, 1, 1, 1, 1}));
  CHECK(empty.trimmed.scores.empty());
  CHECK(label_trim_p_value(empty, -5.0).value() == 1.0);
}

TEST_CASE("label trim with m = n and outliers on top recovers the inliers") {
  const ScoreSet cal{{0.1, 0.5, 9.0, 0.3, 8.0}, std::nullopt};
  const StoredLabelOracle oracle({0, 0, 1, 0, 1});
  const TrimOutcome out = label_trim(cal, cal.size(), oracle);
  CHECK(out.trimmed.scores == std::vector<double>{0.1, 0.5, 0.3});
}

TEST_CASE("ties resolve by index with the higher index counted as larger") {
  const std::vector<double> s{2, 2, 2, 1};
  CHECK(top_m_indices(s, 2) == std::vector<std::size_t>{2, 1});
  CHECK(naive_trim(ScoreSet{s, std::nullopt}, 2).scores == std::vector<double>{2, 1});
}

TEST_CASE("small clean examples") {
  const ScoreSet cal{{1, 2, 3, 4, 5}, std::nullopt};
  const StoredLabelOracle all_out({1, 1, 1, 1, 1});
  CHECK(small_clean(cal, 0, 1, all_out).scores.empty());
  CHECK(small_clean(cal, 3, 1, all_out).scores.empty());
  CHECK(conformal_p_value(small_clean(cal, 3, 1, all_out), 2.0).value() == 1.0);
  CHECK_THROWS_AS(small_clean(cal, 6, 1, all_out), InvalidArgument);

  // The drawn set is exactly the generator's draw; keep its inliers.
  const StoredLabelOracle labels({0, 1, 0, 1, 1});
  Rng rng(42);
  const auto drawn = rng.sample_without_replacement(5, 3);
  std::vector<double> expected;
  for (std::size_t i : drawn)
    if (labels.label(i) == kInlier) expected.push_back(cal.scores[i]);
  CHECK(small_clean(cal, 3, 42, labels).scores == expected);
  CHECK(small_clean(cal, 3, 42, labels).scores == small_clean(cal, 3, 42, labels).scores);
}

TEST_CASE("oracle rejects out-of-range queries") {
  const StoredLabelOracle o({0, 1});
  CHECK(o.label(1) == kOutlier);
  CHECK_THROWS_AS(o.label(2), InvalidArgument);
}

TEST_CASE("budget condition") {
  CHECK(budget_condition_holds(50, 2500, 0.02));
  CHECK_FALSE(budget_condition_holds(51, 2500, 0.02));
  CHECK(budget_condition_holds(0, 0, 0.5));
  CHECK(budget_condition_holds(0, 10, 0.01));
}

TEST_CASE("label trim invariants over random labelled sets") {
  Rng rng(909);
  for (int rep = 0; rep < 2000; ++rep) {
    const std::size_t n = rng.below(40);
    std::vector<double> scores(n);
    std::vector<int> lab(n);
    std::vector<Label> lab8(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values so ties occur.
      scores[i] = static_cast<double>(rng.below(12));
      lab[i] = rng.uniform() < 0.3 ? 1 : 0;
      lab8[i] = static_cast<Label>(lab[i]);
    }
    const std::size_t m = rng.below(n + 5);
    const ScoreSet cal{scores, std::nullopt};
    const TrimOutcome out = label_trim(cal, m, StoredLabelOracle(lab8));
    const auto ref = oracle::label_trim(scores, lab, m);

    CHECK(sorted_copy(out.annotated_indices) == ref.annotated);
    CHECK(out.kept_indices == ref.kept);
    CHECK(out.annotated_indices.size() == std::min(m, n));

    std::size_t n1 = 0;
    for (int l : lab) n1 += l;
    CHECK(out.removed_indices.size() <= std::min(m, n1));
    CHECK(out.trimmed.size() == n - out.removed_indices.size());

    const std::set<std::size_t> kept(out.kept_indices.begin(), out.kept_indices.end());
    for (std::size_t i = 0; i < n; ++i)
      if (lab[i] == 0) CHECK(kept.count(i) == 1);

    // Same candidate set as naive trim.
    if (m <= n) {
      const auto top = top_m_indices(scores, m);
      CHECK(sorted_copy(top) == ref.annotated);
      CHECK(naive_trim(cal, m).size() == n - m);
    }

    if (m <= n) {
      const ScoreSet sc = small_clean(cal, m, rep, StoredLabelOracle(lab8));
      CHECK(sc.size() <= m);
      CHECK(sc.size() + std::min(m, n1) >= m);
    }
  }
}
