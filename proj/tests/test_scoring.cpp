#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "codcal/dataio.hpp"
#include "codcal/error.hpp"
#include "codcal/rng.hpp"
#include "codcal/scoring.hpp"
#include "oracles.hpp"

using namespace codcal;

TEST_CASE("knn scorer: worked examples") {
  const Scorer one = fit_knn_scorer(FeatureMatrix{{0.0, 0.0}}, 1);
  CHECK(one.score(std::vector<double>{0.0, 0.0}) == 0.0);

  const FeatureMatrix two{{0.0, 0.0}, {2.0, 0.0}};
  CHECK(fit_knn_scorer(two, 2).score(std::vector<double>{1.0, 0.0}) == doctest::Approx(1.0));
  CHECK(fit_knn_scorer(two, 1).score(std::vector<double>{0.0, 1.0}) == doctest::Approx(1.0));
}

TEST_CASE("knn scorer: argument errors") {
  const FeatureMatrix two{{0.0, 0.0}, {2.0, 0.0}};
  CHECK_THROWS_AS(fit_knn_scorer(two, 3), InvalidArgument);
  CHECK_THROWS_AS(fit_knn_scorer(two, 0), InvalidArgument);
  CHECK_THROWS_AS(fit_knn_scorer(FeatureMatrix(2), 1), InvalidArgument);
  const Scorer s = fit_knn_scorer(two, 1);
  CHECK_THROWS_AS(s.score(std::vector<double>{1.0}), InvalidArgument);
  CHECK_THROWS_AS(score_batch(s, FeatureMatrix{{1.0, 2.0, 3.0}}), InvalidArgument);
}

TEST_CASE("knn scorer matches a full-sort oracle") {
  Rng rng(11);
  std::vector<std::vector<double>> train_rows;
  FeatureMatrix train(3);
  for (int i = 0; i < 60; ++i) {
    std::vector<double> r{rng.normal(), rng.normal(), rng.normal()};
    train.append(r);
    train_rows.push_back(r);
  }
  for (std::size_t k : {1u, 4u, 60u}) {
    const Scorer s = fit_knn_scorer(train, k);
    for (int q = 0; q < 20; ++q) {
      std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
      CHECK(s.score(x) == doctest::Approx(oracle::knn(train_rows, x, k)).epsilon(1e-12));
      CHECK(s.score(x) >= 0.0);
    }
  }
}

TEST_CASE("mahalanobis scorer: identity covariance examples") {
  // Four points with mean (0,0) and ML covariance I.
  const FeatureMatrix train{{1.0, 1.0}, {1.0, -1.0}, {-1.0, 1.0}, {-1.0, -1.0}};
  const Scorer s = fit_mahalanobis_scorer(train, 0.0);
  CHECK(s.score(std::vector<double>{0.0, 0.0}) == doctest::Approx(0.0));
  CHECK(s.score(std::vector<double>{3.0, 4.0}) == doctest::Approx(5.0).epsilon(1e-12));

  const FeatureMatrix shifted{{2.0, 2.0}, {2.0, 0.0}, {0.0, 2.0}, {0.0, 0.0}};
  const Scorer t = fit_mahalanobis_scorer(shifted, 0.0);
  CHECK(t.score(std::vector<double>{1.0, 1.0}) == doctest::Approx(0.0));
}

TEST_CASE("mahalanobis scorer: translation invariance and PSD state") {
  const LabeledDataset d = gen_gaussian_mixture(200, 0, 3, 0.0, 1.0, 5);
  std::vector<double> moved = d.points.values();
  for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += (i % 3 == 0 ? 10.0 : -4.0);
  const Scorer a = fit_mahalanobis_scorer(d.points, 1e-6);
  const Scorer b = fit_mahalanobis_scorer(FeatureMatrix(3, moved), 1e-6);
  const std::vector<double> x{0.3, -1.2, 2.0};
  const std::vector<double> y{10.3, -5.2, -2.0};
  CHECK(a.score(x) == doctest::Approx(b.score(y)).epsilon(1e-9));

  const auto& inv = std::get<MahalanobisState>(a.state()).inverse_covariance;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(inv[i * 3 + j] == inv[j * 3 + i]);
}

TEST_CASE("mahalanobis scorer: singular covariance") {
  const FeatureMatrix collinear{{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}};
  CHECK_THROWS_AS(fit_mahalanobis_scorer(collinear, 0.0), NumericalFailure);
  CHECK_NOTHROW(fit_mahalanobis_scorer(collinear, 0.1));
  CHECK_THROWS_AS(fit_mahalanobis_scorer(FeatureMatrix{{1.0, 2.0}}, 0.1), InvalidArgument);
}

TEST_CASE("score_batch is an elementwise map and matches the serial kernel") {
  const LabeledDataset d = gen_gaussian_mixture(300, 20, 4, 2.0, 1.0, 9);
  const LabeledDataset q = gen_gaussian_mixture(150, 10, 4, 2.0, 1.0, 10);
  for (const Scorer& s : {fit_knn_scorer(d.points, 5), fit_mahalanobis_scorer(d.points, 1e-6)}) {
    CHECK(score_batch(s, FeatureMatrix(4)).empty());

    const auto par = score_batch(s, q.points);
    const auto ser = score_batch_serial(s, q.points);
    REQUIRE(par.size() == q.size());
    CHECK(par == ser);
    CHECK(par[7] == s.score(q.points.row(7)));

    std::vector<std::size_t> perm(q.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = (i * 37) % perm.size();
    const auto permuted = score_batch(s, q.points.select(perm));
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(permuted[i] == par[perm[i]]);
  }
}
