#include "codcal/experiments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>

#include <omp.h>

#include "json.hpp"

#include "codcal/bounds.hpp"
#include "codcal/error.hpp"
#include "codcal/rng.hpp"
#include "codcal/trimming.hpp"

namespace codcal {

namespace {

// Sub-stream keys within a trial.
constexpr std::uint64_t kPoolStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kJitterStream = 3;
constexpr std::uint64_t kSelectionStream = 4;
// Keys off the master seed.
constexpr std::uint64_t kRankingStream = 0x72616e6b696e67ULL;

std::uint64_t digest(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
  std::string bytes;
  bytes.reserve((a.size() + b.size() + c.size()) * sizeof(double));
  for (auto part : {a, b, c}) {
    bytes.append(reinterpret_cast<const char*>(part.data()), part.size() * sizeof(double));
  }
  return std::hash<std::string_view>{}(bytes);
}

std::size_t auto_outlier_pool(const ExperimentConfig& c) {
  const std::size_t contam = contaminated_outlier_count(c.split.contamination_rate, c.split.train_size) +
                             contaminated_outlier_count(c.split.contamination_rate, c.split.cal_size);
  const std::size_t test = c.split.test_outlier_size;
  double need = static_cast<double>(contam + test);
  if (const auto* p = std::get_if<PercentileInjection>(&c.split.injection)) {
    need = std::max(need, static_cast<double>(contam) / p->q);
  } else if (const auto* d = std::get_if<DriftInjection>(&c.split.injection)) {
    need = std::max(static_cast<double>(contam) / (d->train_cal.hi - d->train_cal.lo),
                    static_cast<double>(contam + test) / (d->test.hi - d->test.lo));
  } else {
    return contam + test;
  }
  return static_cast<std::size_t>(std::ceil(need * 1.1)) + 8;
}

struct CalibrationView {
  std::vector<double> scores;
  std::vector<Label> labels;
  std::size_t trimmed_outliers = 0;
  std::size_t trimmed_inliers = 0;
};

CalibrationView view_of(const ScoreSet& set) {
  return {set.scores, *set.labels, 0, 0};
}

CalibrationView keep_label(const ScoreSet& cal, Label keep) {
  CalibrationView v;
  for (std::size_t i = 0; i < cal.size(); ++i) {
    if ((*cal.labels)[i] == keep) {
      v.scores.push_back(cal.scores[i]);
      v.labels.push_back(keep);
    } else {
      ++(keep == kInlier ? v.trimmed_outliers : v.trimmed_inliers);
    }
  }
  return v;
}

}  // namespace

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::standard: return "standard";
    case Method::oracle: return "oracle";
    case Method::naive_trim: return "naive-trim";
    case Method::small_clean: return "small-clean";
    case Method::label_trim: return "label-trim";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) noexcept {
  for (Method m : kAllMethods)
    if (method_name(m) == name) return m;
  return std::nullopt;
}

Scorer fit_scorer(const ScorerSpec& spec, const FeatureMatrix& train) {
  if (spec.kind == Scorer::Kind::knn) return fit_knn_scorer(train, spec.k);
  return fit_mahalanobis_scorer(train, spec.ridge);
}

void ExperimentConfig::validate() const {
  split.validate();
  if (alphas.empty()) throw InvalidArgument("alpha: grid must be nonempty");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw InvalidArgument("alpha: values must lie in (0, 1)");
  if (trials == 0) throw InvalidArgument("trials: must be >= 1");
  if (methods.empty()) throw InvalidArgument("methods: must be nonempty");
  if (split.cal_size == 0) throw InvalidArgument("split.cal_size: must be >= 1");
  if (split.train_size == 0) throw InvalidArgument("split.train_size: must be >= 1");
  if (split.test_inlier_size == 0) throw InvalidArgument("split.test_inlier_size: must be >= 1");
  if (split.test_outlier_size == 0) throw InvalidArgument("split.test_outlier_size: must be >= 1");
  const bool uses_small_clean = std::find(methods.begin(), methods.end(), Method::small_clean) != methods.end();
  if (uses_small_clean && budget > split.cal_size) {
    throw InvalidArgument("budget: Small-Clean needs budget <= split.cal_size");
  }
  if (naive_trim_count() > split.cal_size) throw InvalidArgument("naive_trim: removal exceeds split.cal_size");
  if (scorer.kind == Scorer::Kind::knn && (scorer.k == 0 || scorer.k > split.train_size)) {
    throw InvalidArgument("scorer.k: must lie in [1, split.train_size]");
  }
  if (!(scorer.ridge >= 0.0)) throw InvalidArgument("scorer.ridge: must be nonnegative");
  if (const auto* g = std::get_if<GaussianSource>(&data)) {
    if (g->dim == 0) throw InvalidArgument("data.dim: must be >= 1");
    if (!(g->scale > 0.0)) throw InvalidArgument("data.scale: must be positive");
  } else if (std::get<CsvSource>(data).path.empty()) {
    throw InvalidArgument("data.path: must be set for csv data");
  }
}

std::size_t ExperimentConfig::naive_trim_count() const noexcept {
  if (naive_trim.match_rate) return contaminated_outlier_count(split.contamination_rate, split.cal_size);
  return naive_trim.fixed;
}

const MethodMetrics& TrialMetrics::at(Method m, double alpha) const {
  const auto mi = std::find(methods.begin(), methods.end(), m);
  const auto ai = std::find(alphas.begin(), alphas.end(), alpha);
  if (mi == methods.end() || ai == alphas.end()) throw InvalidArgument("TrialMetrics: no such cell");
  return at(static_cast<std::size_t>(mi - methods.begin()), static_cast<std::size_t>(ai - alphas.begin()));
}

const AggregateCell& AggregateMetrics::cell(Method m, double alpha) const {
  for (const auto& c : cells)
    if (c.method == m && c.alpha == alpha) return c;
  throw InvalidArgument("AggregateMetrics: no cell for " + std::string(method_name(m)));
}

Stat mean_and_se(std::span<const double> values) {
  Stat s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  s.mean = sum / n;
  if (values.size() < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return s;
}

double type_i_error(std::span<const PValue> inlier_p_values, double alpha) {
  if (inlier_p_values.empty()) throw InvalidArgument("type_i_error: no inlier p-values");
  const auto hits = std::count_if(inlier_p_values.begin(), inlier_p_values.end(),
                                  [alpha](const PValue& p) { return reject(p, alpha); });
  return static_cast<double>(hits) / static_cast<double>(inlier_p_values.size());
}

double power(std::span<const PValue> outlier_p_values, double alpha) {
  if (outlier_p_values.empty()) throw InvalidArgument("power: no outlier p-values");
  return type_i_error(outlier_p_values, alpha);
}

Experiment::Experiment(ExperimentConfig config) : config_(std::move(config)) {
  config_.validate();
  const bool ranked = injection_needs_scores(config_.split.injection);
  if (const auto* csv = std::get_if<CsvSource>(&config_.data)) {
    const LabeledDataset all = load_csv_dataset(csv->path, csv->label_column);
    fixed_pools_ = Pools{all.with_label(kInlier), all.with_label(kOutlier)};
    if (ranked) {
      ranking_scorer_ = fit_scorer(config_.scorer, fixed_pools_->inliers.points);
      fixed_outlier_scores_ = score_batch(*ranking_scorer_, fixed_pools_->outliers.points);
    }
  } else if (ranked) {
    const auto& g = std::get<GaussianSource>(config_.data);
    const std::size_t n = std::max<std::size_t>(500, config_.split.cal_size);
    const LabeledDataset clean = gen_gaussian_mixture(n, 0, g.dim, g.shift, g.scale,
                                                      derive_seed(config_.master_seed, kRankingStream));
    ranking_scorer_ = fit_scorer(config_.scorer, clean.points);
  }
}

Experiment::Pools Experiment::trial_pools(std::uint64_t trial_seed) const {
  if (fixed_pools_) return *fixed_pools_;
  const auto& g = std::get<GaussianSource>(config_.data);
  const auto& s = config_.split;
  const std::size_t in_demand =
      s.train_size - contaminated_outlier_count(s.contamination_rate, s.train_size) + s.cal_size -
      contaminated_outlier_count(s.contamination_rate, s.cal_size) + s.test_inlier_size;
  const std::size_t n_in = g.inlier_pool ? g.inlier_pool : in_demand;
  const std::size_t n_out = g.outlier_pool ? g.outlier_pool : auto_outlier_pool(config_);
  const LabeledDataset mix =
      gen_gaussian_mixture(n_in, n_out, g.dim, g.shift, g.scale, derive_seed(trial_seed, kPoolStream));
  return {mix.with_label(kInlier), mix.with_label(kOutlier)};
}

TrialMetrics Experiment::run_trial(std::size_t trial_index) const {
  const ExperimentConfig& c = config_;
  TrialMetrics out;
  out.trial_index = trial_index;
  out.trial_seed = derive_seed(c.master_seed, trial_index);
  out.methods = c.methods;
  out.alphas = c.alphas;

  const Pools pools = trial_pools(out.trial_seed);
  SplitSpec spec = c.split;
  spec.seed = derive_seed(out.trial_seed, kSplitStream);
  Splits splits;
  if (!injection_needs_scores(spec.injection)) {
    splits = make_splits(pools.inliers, pools.outliers, spec);
  } else if (fixed_pools_) {
    splits = make_splits(pools.inliers, pools.outliers, spec, std::span<const double>(fixed_outlier_scores_));
  } else {
    splits = make_splits(pools.inliers, pools.outliers, spec, &*ranking_scorer_);
  }

  // One model, fit on contaminated training data, shared by every method.
  const Scorer scorer = fit_scorer(c.scorer, splits.train.points);
  std::vector<double> cal_scores = score_batch(scorer, splits.cal.points);
  std::vector<double> in_scores = score_batch(scorer, splits.test_inlier.points);
  std::vector<double> out_scores = score_batch(scorer, splits.test_outlier.points);

  if (c.jitter) {
    std::vector<double> all;
    all.reserve(cal_scores.size() + in_scores.size() + out_scores.size());
    all.insert(all.end(), cal_scores.begin(), cal_scores.end());
    all.insert(all.end(), in_scores.begin(), in_scores.end());
    all.insert(all.end(), out_scores.begin(), out_scores.end());
    const std::vector<double> j =
        jitter_scores(all, default_jitter_epsilon(all), derive_seed(out.trial_seed, kJitterStream));
    auto it = j.begin();
    for (auto* v : {&cal_scores, &in_scores, &out_scores}) {
      std::copy(it, it + static_cast<std::ptrdiff_t>(v->size()), v->begin());
      it += static_cast<std::ptrdiff_t>(v->size());
    }
  }

  const ScoreSet cal{cal_scores, splits.cal.labels};
  const StoredLabelOracle oracle(splits.cal.labels);
  out.n1 = splits.cal.outlier_count();
  out.n0 = cal.size() - out.n1;

  out.cells.reserve(c.methods.size() * c.alphas.size());
  for (Method m : c.methods) {
    CalibrationView view;
    switch (m) {
      case Method::standard:
        view = view_of(cal);
        break;
      case Method::oracle:
        view = keep_label(cal, kInlier);
        break;
      case Method::naive_trim: {
        const std::size_t k = c.naive_trim_count();
        view = view_of(naive_trim(cal, k));
        const std::size_t removed_out = out.n1 - static_cast<std::size_t>(
                                                     std::count(view.labels.begin(), view.labels.end(), kOutlier));
        view.trimmed_outliers = removed_out;
        view.trimmed_inliers = k - removed_out;
        break;
      }
      case Method::small_clean: {
        view = view_of(small_clean(cal, c.budget, derive_seed(out.trial_seed, kSelectionStream), oracle));
        view.trimmed_outliers = c.budget - view.scores.size();
        break;
      }
      case Method::label_trim: {
        const TrimOutcome t = label_trim(cal, c.budget, oracle);
        view = view_of(t.trimmed);
        view.trimmed_outliers = t.removed_indices.size();
        break;
      }
    }
    out.score_digest.push_back(digest(cal_scores, in_scores, out_scores));

    const SortedCalibration sorted(view.scores);
    const std::vector<PValue> p_in = sorted.p_values(in_scores);
    const std::vector<PValue> p_out = sorted.p_values(out_scores);
    std::vector<double> remaining;
    for (std::size_t i = 0; i < view.scores.size(); ++i)
      if (view.labels[i] == kOutlier) remaining.push_back(view.scores[i]);

    for (double alpha : c.alphas) {
      MethodMetrics mm;
      mm.type_i_error = type_i_error(p_in, alpha);
      mm.power = power(p_out, alpha);
      mm.trimmed_outliers = view.trimmed_outliers;
      mm.trimmed_inliers = view.trimmed_inliers;
      mm.calibration_size = view.scores.size();
      mm.remaining_outliers = remaining.size();
      mm.outlier_cdf_at_quantile = empirical_cdf(remaining, sorted.threshold(alpha).value);
      mm.bound_term = lt_bound_term(alpha, out.n0, static_cast<double>(remaining.size()),
                                    mm.outlier_cdf_at_quantile);
      out.cells.push_back(mm);
    }
  }
  return out;
}

TrialMetrics run_trial(const ExperimentConfig& config, std::size_t trial_index) {
  return Experiment(config).run_trial(trial_index);
}

AggregateMetrics aggregate(std::span<const TrialMetrics> trials) {
  AggregateMetrics agg;
  agg.trials = trials.size();
  agg.se_defined = trials.size() >= 2;
  if (trials.empty()) return agg;
  const TrialMetrics& first = trials.front();
  agg.n0 = first.n0;
  agg.n1 = first.n1;

  std::vector<double> buf(trials.size());
  auto stat_of = [&](std::size_t mi, std::size_t ai, auto field) {
    for (std::size_t t = 0; t < trials.size(); ++t) buf[t] = field(trials[t].at(mi, ai));
    return mean_and_se(buf);
  };
  for (std::size_t mi = 0; mi < first.methods.size(); ++mi) {
    for (std::size_t ai = 0; ai < first.alphas.size(); ++ai) {
      AggregateCell cell;
      cell.method = first.methods[mi];
      cell.alpha = first.alphas[ai];
      cell.type_i_error = stat_of(mi, ai, [](const MethodMetrics& m) { return m.type_i_error; });
      cell.power = stat_of(mi, ai, [](const MethodMetrics& m) { return m.power; });
      cell.trimmed_outliers = stat_of(mi, ai, [](const MethodMetrics& m) { return double(m.trimmed_outliers); });
      cell.trimmed_inliers = stat_of(mi, ai, [](const MethodMetrics& m) { return double(m.trimmed_inliers); });
      cell.calibration_size = stat_of(mi, ai, [](const MethodMetrics& m) { return double(m.calibration_size); });
      cell.remaining_outliers =
          stat_of(mi, ai, [](const MethodMetrics& m) { return double(m.remaining_outliers); });
      cell.outlier_cdf_at_quantile =
          stat_of(mi, ai, [](const MethodMetrics& m) { return m.outlier_cdf_at_quantile; });
      cell.bound_term = stat_of(mi, ai, [](const MethodMetrics& m) { return m.bound_term; });
      agg.cells.push_back(cell);
    }
  }
  return agg;
}

AggregateMetrics run_monte_carlo(const ExperimentConfig& config, unsigned workers) {
  const Experiment experiment(config);
  const std::size_t n = config.trials;
  std::vector<TrialMetrics> results(n);
  std::vector<std::string> errors(n);
  std::vector<char> failed(n, 0);
  const int threads = workers == 0 ? omp_get_max_threads() : static_cast<int>(workers);

#pragma omp parallel for num_threads(threads) schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto t = static_cast<std::size_t>(i);
    try {
      results[t] = experiment.run_trial(t);
    } catch (const std::exception& e) {
      errors[t] = e.what();
      failed[t] = 1;
    }
  }
  for (std::size_t t = 0; t < n; ++t)
    if (failed[t]) throw TrialError(t, errors[t]);
  return aggregate(results);
}

AggregateMetrics run_monte_carlo_serial(const ExperimentConfig& config) {
  const Experiment experiment(config);
  std::vector<TrialMetrics> results;
  results.reserve(config.trials);
  for (std::size_t t = 0; t < config.trials; ++t) {
    try {
      results.push_back(experiment.run_trial(t));
    } catch (const std::exception& e) {
      throw TrialError(t, e.what());
    }
  }
  return aggregate(results);
}

std::string_view axis_name(SweepAxis axis) noexcept {
  switch (axis) {
    case SweepAxis::contamination_rate: return "contamination_rate";
    case SweepAxis::budget: return "budget";
    case SweepAxis::alpha: return "alpha";
  }
  return "unknown";
}

std::optional<SweepAxis> parse_axis(std::string_view name) noexcept {
  for (SweepAxis a : {SweepAxis::contamination_rate, SweepAxis::budget, SweepAxis::alpha})
    if (axis_name(a) == name) return a;
  return std::nullopt;
}

ExperimentConfig sweep_point_config(const ExperimentConfig& base, SweepAxis axis, double value) {
  ExperimentConfig c = base;
  switch (axis) {
    case SweepAxis::contamination_rate:
      if (!(value >= 0.0 && value < 1.0)) throw InvalidArgument("sweep: contamination_rate outside [0, 1)");
      c.split.contamination_rate = value;
      break;
    case SweepAxis::budget:
      if (!(value >= 0.0) || value != std::floor(value) || value > 1e15) {
        throw InvalidArgument("sweep: budget must be a nonnegative integer");
      }
      c.budget = static_cast<std::size_t>(value);
      break;
    case SweepAxis::alpha:
      if (!(value > 0.0 && value < 1.0)) throw InvalidArgument("sweep: alpha outside (0, 1)");
      c.alphas = {value};
      break;
  }
  c.master_seed = derive_seed(derive_seed(base.master_seed, static_cast<std::uint64_t>(axis) + 1),
                              std::bit_cast<std::uint64_t>(value));
  c.validate();
  return c;
}

std::vector<AggregateMetrics> sweep(const ExperimentConfig& base, SweepAxis axis,
                                    std::span<const double> values, unsigned workers) {
  if (values.empty()) throw InvalidArgument("sweep: no values");
  std::vector<ExperimentConfig> configs;
  for (double v : values) configs.push_back(sweep_point_config(base, axis, v));
  std::vector<AggregateMetrics> out;
  for (const auto& c : configs) out.push_back(run_monte_carlo(c, workers));
  return out;
}

namespace {

std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double standard_power(const AggregateMetrics& m, double alpha) {
  for (const auto& c : m.cells)
    if (c.method == Method::standard && c.alpha == alpha) return c.power.mean;
  return NAN;
}

}  // namespace

void write_results_csv(std::ostream& out, std::span<const SweepPoint> points, const ReportOptions& options) {
  out << "axis,axis_value,method,alpha,trials,n0,n1,"
         "type_i_mean,type_i_se,power_mean,power_se,"
         "trimmed_outliers_mean,trimmed_outliers_se,trimmed_inliers_mean,trimmed_inliers_se,"
         "cal_size_mean,cal_size_se,remaining_outliers_mean,remaining_outliers_se,"
         "outlier_cdf_mean,outlier_cdf_se,bound_term_mean,bound_term_se,"
         "lemma_bound,theorem_bound,";
  if (options.relative_power) out << "power_rel_standard,";
  out << "config_hash,master_seed\n";
  for (const auto& p : points) {
    const auto& m = p.metrics;
    for (const auto& c : m.cells) {
      const double n0p1 = static_cast<double>(m.n0) + 1.0;
      out << p.axis << ',' << fmt12(p.value) << ',' << method_name(c.method) << ',' << fmt12(c.alpha) << ','
          << m.trials << ',' << m.n0 << ',' << m.n1;
      for (const Stat& s : {c.type_i_error, c.power, c.trimmed_outliers, c.trimmed_inliers, c.calibration_size,
                            c.remaining_outliers, c.outlier_cdf_at_quantile, c.bound_term}) {
        out << ',' << fmt12(s.mean) << ',' << fmt12(s.se);
      }
      out << ',' << fmt12(c.alpha - c.bound_term.mean) << ',' << fmt12(c.alpha + 1.0 / n0p1 - c.bound_term.mean);
      if (options.relative_power) out << ',' << fmt12(c.power.mean / standard_power(m, c.alpha));
      out << ',' << options.config_hash << ',' << options.master_seed << '\n';
    }
  }
}

void write_results_json(std::ostream& out, std::span<const SweepPoint> points, const ReportOptions& options) {
  using nlohmann::json;
  auto stat = [](const Stat& s) { return json{{"mean", s.mean}, {"se", s.se}}; };
  json doc;
  doc["config_hash"] = options.config_hash;
  doc["master_seed"] = options.master_seed;
  json arr = json::array();
  for (const auto& p : points) {
    json jp;
    jp["axis"] = p.axis;
    jp["value"] = p.value;
    jp["trials"] = p.metrics.trials;
    jp["se_defined"] = p.metrics.se_defined;
    jp["n0"] = p.metrics.n0;
    jp["n1"] = p.metrics.n1;
    json cells = json::array();
    for (const auto& c : p.metrics.cells) {
      json jc{{"method", method_name(c.method)},
              {"alpha", c.alpha},
              {"type_i_error", stat(c.type_i_error)},
              {"power", stat(c.power)},
              {"trimmed_outliers", stat(c.trimmed_outliers)},
              {"trimmed_inliers", stat(c.trimmed_inliers)},
              {"calibration_size", stat(c.calibration_size)},
              {"remaining_outliers", stat(c.remaining_outliers)},
              {"outlier_cdf_at_quantile", stat(c.outlier_cdf_at_quantile)},
              {"bound_term", stat(c.bound_term)}};
      if (options.relative_power) jc["power_rel_standard"] = c.power.mean / standard_power(p.metrics, c.alpha);
      cells.push_back(std::move(jc));
    }
    jp["cells"] = std::move(cells);
    arr.push_back(std::move(jp));
  }
  doc["points"] = std::move(arr);
  out << doc.dump(2) << '\n';
}

}  // namespace codcal
