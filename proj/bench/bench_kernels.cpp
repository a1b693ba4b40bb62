// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include "codcal/dataio.hpp"
#include "codcal/experiments.hpp"
#include "codcal/scoring.hpp"

using namespace codcal;

namespace {

struct KnnFixture {
  LabeledDataset train = gen_gaussian_mixture(2000, 0, 8, 0.0, 1.0, 1);
  LabeledDataset query = gen_gaussian_mixture(1000, 50, 8, 3.0, 1.0, 2);
  Scorer scorer = fit_knn_scorer(train.points, 10);
};

const KnnFixture& knn_fixture() {
  static const KnnFixture f;
  return f;
}

ExperimentConfig mc_config(std::size_t trials) {
  ExperimentConfig c;
  c.split.train_size = 1000;
  c.split.cal_size = 1000;
  c.split.test_inlier_size = 500;
  c.split.test_outlier_size = 50;
  c.split.contamination_rate = 0.03;
  c.trials = trials;
  c.master_seed = 5;
  return c;
}

void BM_knn_score_batch(benchmark::State& state) {
  const auto& f = knn_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(score_batch(f.scorer, f.query.points));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.query.size()));
}

void BM_knn_score_batch_serial(benchmark::State& state) {
  const auto& f = knn_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(score_batch_serial(f.scorer, f.query.points));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.query.size()));
}

void BM_monte_carlo(benchmark::State& state) {
  const ExperimentConfig c = mc_config(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo(c));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_monte_carlo_serial(benchmark::State& state) {
  const ExperimentConfig c = mc_config(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo_serial(c));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_knn_score_batch)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_knn_score_batch_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_monte_carlo)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_monte_carlo_serial)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
