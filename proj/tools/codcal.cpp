// codcal: conformal outlier detection with contaminated calibration data.
//
//   codcal simulate --config run.json --out results/ [--seed N] [--workers W] [--set key=value]...
//   codcal pvalue   --cal cal.csv --test test.csv --method label-trim --m 50 --alpha 0.02
//   codcal bounds   --form lemma --alpha 0.02 --n0 970 --n1 30 --cdf 0.1
//   codcal gen      --n-inlier 1000 --n-outlier 30 --dim 2 --shift 3 --out data.csv
//
// Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "codcal/bounds.hpp"
#include "codcal/config.hpp"
#include "codcal/conformal.hpp"
#include "codcal/dataio.hpp"
#include "codcal/error.hpp"
#include "codcal/experiments.hpp"
#include "codcal/rng.hpp"
#include "codcal/scoring.hpp"
#include "codcal/trimming.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Thrown for user-facing usage problems that are not library errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("CODCAL_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto seed = std::stoull(v, &used);
    if (v[used] != '\0') throw UsageError("");
    return seed;
  } catch (...) {
    throw UsageError(std::string("CODCAL_SEED is not an unsigned integer: '") + v + "'");
  }
}

/// Write `content` to `path` via a temporary file and rename.
void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw codcal::IoError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw codcal::IoError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  unsigned workers = 0;
  std::vector<std::string> overrides;
  bool relative_power = false;
};

int cmd_simulate(const SimulateArgs& a) {
  json doc;
  {
    std::ifstream in(a.config_path);
    if (!in) throw UsageError("cannot open config '" + a.config_path + "'");
    doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw UsageError("config '" + a.config_path + "' is not valid JSON");
  }
  for (const auto& o : a.overrides) codcal::apply_override(doc, o);

  std::uint64_t seed = 0;
  if (a.seed) {
    seed = *a.seed;
  } else if (doc.contains("seed")) {
    // validated by parse_simulation below
  } else if (auto e = env_seed()) {
    seed = *e;
  }
  if (a.seed || !doc.contains("seed")) doc["seed"] = seed;

  const codcal::SimulationPlan plan = codcal::parse_simulation(doc);
  const std::string hash = codcal::config_hash(doc);
  const std::uint64_t master_seed = plan.config.master_seed;
  const std::string started = utc_now();

  std::vector<codcal::SweepPoint> points;
  if (plan.sweep) {
    for (double v : plan.sweep->values) {
      const auto cfg = codcal::sweep_point_config(plan.config, plan.sweep->axis, v);
      points.push_back({std::string(codcal::axis_name(plan.sweep->axis)), v,
                        codcal::run_monte_carlo(cfg, a.workers)});
      std::cerr << "codcal: " << points.back().axis << "=" << fmt12(v) << " done ("
                << cfg.trials << " trials)\n";
    }
  } else {
    points.push_back({"none", 0.0, codcal::run_monte_carlo(plan.config, a.workers)});
    std::cerr << "codcal: " << plan.config.trials << " trials done\n";
  }

  const fs::path out_dir(a.out_dir);
  fs::create_directories(out_dir);
  const codcal::ReportOptions report{hash, master_seed, a.relative_power};
  std::ostringstream csv, js;
  codcal::write_results_csv(csv, points, report);
  codcal::write_results_json(js, points, report);
  write_atomic(out_dir / "results.csv", csv.str());
  write_atomic(out_dir / "results.json", js.str());

  json manifest{{"tool", "codcal"},
                {"version", kVersion},
                {"config_hash", hash},
                {"master_seed", master_seed},
                {"workers", a.workers == 0 ? omp_get_max_threads() : static_cast<int>(a.workers)},
                {"started_at", started},
                {"finished_at", utc_now()},
                {"outputs", {"results.csv", "results.json"}},
                {"config", doc}};
  write_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------- pvalue

struct PvalueArgs {
  std::string cal_csv;
  std::string test_csv;
  std::string method = "standard";
  std::size_t m = 0;
  double alpha = 0.05;
  std::optional<std::uint64_t> seed;
  std::string label_column = "label";
  std::string score_column = "score";
  std::string train_csv;
  std::string scorer = "mahalanobis";
  std::size_t k = 5;
  double ridge = 1e-6;
  bool jitter = false;
  std::string out;
};

codcal::FeatureMatrix features_of(const codcal::CsvTable& t, const std::string& exclude) {
  const auto skip = t.column(exclude);
  std::vector<std::vector<double>> cols;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (!skip || c != *skip) cols.push_back(t.numeric_column(c));
  if (cols.empty()) throw UsageError("no feature columns");
  codcal::FeatureMatrix fm(cols.size());
  std::vector<double> row(cols.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) row[c] = cols[c][r];
    fm.append(row);
  }
  return fm;
}

int cmd_pvalue(const PvalueArgs& a) {
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
  const auto method = codcal::parse_method(a.method);
  if (!method || *method == codcal::Method::oracle) {
    throw UsageError("--method must be standard, label-trim, naive-trim or small-clean");
  }
  const codcal::CsvTable cal_t = codcal::read_csv_table(a.cal_csv);
  const codcal::CsvTable test_t = codcal::read_csv_table(a.test_csv);

  std::vector<double> cal_scores, test_scores;
  if (!a.train_csv.empty()) {
    const codcal::CsvTable train_t = codcal::read_csv_table(a.train_csv);
    const codcal::FeatureMatrix train = features_of(train_t, a.label_column);
    const codcal::Scorer scorer = a.scorer == "knn" ? codcal::fit_knn_scorer(train, a.k)
                                                    : codcal::fit_mahalanobis_scorer(train, a.ridge);
    cal_scores = codcal::score_batch(scorer, features_of(cal_t, a.label_column));
    test_scores = codcal::score_batch(scorer, features_of(test_t, a.label_column));
  } else {
    const auto cs = cal_t.column(a.score_column);
    const auto ts = test_t.column(a.score_column);
    if (!cs || !ts) throw UsageError("score column '" + a.score_column + "' missing (or pass --train)");
    cal_scores = cal_t.numeric_column(*cs);
    test_scores = test_t.numeric_column(*ts);
  }

  const std::uint64_t seed = a.seed ? *a.seed : env_seed().value_or(0);
  if (a.jitter) {
    std::vector<double> all(cal_scores);
    all.insert(all.end(), test_scores.begin(), test_scores.end());
    const auto j = codcal::jitter_scores(all, codcal::default_jitter_epsilon(all), codcal::derive_seed(seed, 3));
    std::copy(j.begin(), j.begin() + static_cast<std::ptrdiff_t>(cal_scores.size()), cal_scores.begin());
    std::copy(j.begin() + static_cast<std::ptrdiff_t>(cal_scores.size()), j.end(), test_scores.begin());
  }

  codcal::ScoreSet cal{cal_scores, std::nullopt};
  const bool needs_oracle = *method == codcal::Method::label_trim || *method == codcal::Method::small_clean;
  std::optional<codcal::StoredLabelOracle> oracle;
  if (needs_oracle) {
    const auto lc = cal_t.column(a.label_column);
    if (!lc) throw UsageError("method " + a.method + " needs label column '" + a.label_column + "' in --cal");
    std::vector<codcal::Label> labels;
    for (std::size_t r = 0; r < cal_t.rows.size(); ++r) {
      const std::string& v = cal_t.rows[r][*lc];
      if (v != "0" && v != "1") {
        throw codcal::ParseError("line " + std::to_string(r + 2) + ", column '" + a.label_column +
                                     "': label must be 0 or 1, got '" + v + "'",
                                 r + 2, a.label_column);
      }
      labels.push_back(v == "1" ? codcal::kOutlier : codcal::kInlier);
    }
    oracle.emplace(std::move(labels));
  }

  codcal::ScoreSet reference;
  switch (*method) {
    case codcal::Method::label_trim: reference = codcal::label_trim(cal, a.m, *oracle).trimmed; break;
    case codcal::Method::naive_trim: reference = codcal::naive_trim(cal, a.m); break;
    case codcal::Method::small_clean: reference = codcal::small_clean(cal, a.m, seed, *oracle); break;
    default: reference = cal; break;
  }

  const codcal::SortedCalibration sorted(reference.scores);
  std::ostringstream os;
  os << "index,score,p_fraction,p_value,reject\n";
  for (std::size_t i = 0; i < test_scores.size(); ++i) {
    const codcal::PValue p = sorted.p_value(test_scores[i]);
    os << i << ',' << fmt12(test_scores[i]) << ',' << p.fraction() << ',' << fmt12(p.value()) << ','
       << (codcal::reject(p, a.alpha) ? "true" : "false") << '\n';
  }
  if (a.out.empty()) {
    std::cout << os.str();
  } else {
    write_atomic(a.out, os.str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------- bounds

struct BoundsArgs {
  std::string form;
  double alpha = 0.05;
  std::size_t n0 = 0, n1 = 0, n = 0;
  double cdf = 0.0;
  double lt_outliers = 0.0;
  double delta = 0.0;
  double f0_minus_f1 = 0.0;
};

int cmd_bounds(const BoundsArgs& a) {
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
  if (!(a.cdf >= 0.0 && a.cdf <= 1.0)) throw UsageError("--cdf must lie in [0, 1]");
  if (a.form == "lemma") {
    std::cout << fmt12(codcal::lemma_bound(a.alpha, a.n0, a.n1, a.cdf)) << '\n';
  } else if (a.form == "theorem") {
    if (!(a.lt_outliers >= 0.0)) throw UsageError("--lt-outliers must be nonnegative");
    std::cout << fmt12(codcal::theorem_lt_bound(a.alpha, a.n0, a.lt_outliers, a.cdf)) << '\n';
  } else if (a.form == "mixture") {
    if (!(a.delta >= 0.0 && a.delta < 1.0)) throw UsageError("--delta must lie in [0, 1)");
    if (!(a.f0_minus_f1 >= -1.0 && a.f0_minus_f1 <= 1.0)) throw UsageError("--f0-minus-f1 must lie in [-1, 1]");
    std::cout << fmt12(codcal::mixture_bound(a.alpha, a.delta, a.f0_minus_f1)) << '\n';
  } else if (a.form == "oracle-interval") {
    if (a.n == 0) throw UsageError("--n must be >= 1");
    const auto [lo, hi] = codcal::oracle_interval(a.n, a.alpha);
    std::cout << fmt12(lo) << ' ' << fmt12(hi) << '\n';
  } else {
    throw UsageError("--form must be lemma, theorem, mixture or oracle-interval");
  }
  return kExitOk;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::size_t n_inlier = 1000, n_outlier = 0, dim = 2;
  double shift = 3.0, scale = 1.0;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_gen(const GenArgs& a) {
  const std::uint64_t seed = a.seed ? *a.seed : env_seed().value_or(0);
  const auto data = codcal::gen_gaussian_mixture(a.n_inlier, a.n_outlier, a.dim, a.shift, a.scale, seed);
  const fs::path out(a.out);
  const fs::path tmp = out.parent_path() / ("." + out.filename().string() + ".tmp");
  codcal::write_csv_dataset(tmp, data);
  fs::rename(tmp, out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal outlier detection with contaminated calibration data"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a seeded Monte-Carlo experiment or sweep");
  simulate->add_option("--config", sim.config_path, "JSON experiment config")->required();
  simulate->add_option("--out", sim.out_dir, "Output directory")->required();
  simulate->add_option("--seed", sim.seed, "Master seed (overrides config and CODCAL_SEED)");
  simulate->add_option("--workers", sim.workers, "Worker threads (0 = all available)");
  simulate->add_option("--set", sim.overrides, "Config override key=value (repeatable)");
  simulate->add_flag("--relative-power", sim.relative_power, "Add power relative to Standard");

  PvalueArgs pv;
  auto* pvalue = app.add_subcommand("pvalue", "Conformal p-values for test points against a calibration CSV");
  pvalue->add_option("--cal", pv.cal_csv, "Calibration CSV")->required();
  pvalue->add_option("--test", pv.test_csv, "Test CSV")->required();
  pvalue->add_option("--method", pv.method, "standard | label-trim | naive-trim | small-clean");
  pvalue->add_option("--m", pv.m, "Labeling budget / removal count");
  pvalue->add_option("--alpha", pv.alpha, "Target type-I error level");
  pvalue->add_option("--seed", pv.seed, "Seed for small-clean selection and jitter");
  pvalue->add_option("--label-column", pv.label_column, "Calibration label column (oracle)");
  pvalue->add_option("--score-column", pv.score_column, "Precomputed score column");
  pvalue->add_option("--train", pv.train_csv, "Training CSV; fit a scorer on its features instead");
  pvalue->add_option("--scorer", pv.scorer, "knn | mahalanobis")->check(CLI::IsMember({"knn", "mahalanobis"}));
  pvalue->add_option("--k", pv.k, "Neighbours for knn");
  pvalue->add_option("--ridge", pv.ridge, "Ridge for mahalanobis");
  pvalue->add_flag("--jitter", pv.jitter, "Break score ties with seeded jitter");
  pvalue->add_option("--out", pv.out, "Output CSV (default stdout)");

  BoundsArgs bd;
  auto* bounds = app.add_subcommand("bounds", "Evaluate a closed-form type-I error bound");
  bounds->add_option("--form", bd.form, "lemma | theorem | mixture | oracle-interval")->required();
  bounds->add_option("--alpha", bd.alpha, "Target level");
  bounds->add_option("--n0", bd.n0, "Calibration inliers");
  bounds->add_option("--n1", bd.n1, "Calibration outliers");
  bounds->add_option("--n", bd.n, "Clean calibration size (oracle-interval)");
  bounds->add_option("--cdf", bd.cdf, "Outlier empirical CDF at the calibration quantile");
  bounds->add_option("--lt-outliers", bd.lt_outliers, "Outliers remaining after Label-Trim");
  bounds->add_option("--delta", bd.delta, "Mixture contamination proportion");
  bounds->add_option("--f0-minus-f1", bd.f0_minus_f1, "E[F0(Q) - F1(Q)]");

  GenArgs gn;
  auto* gen = app.add_subcommand("gen", "Write a synthetic Gaussian-mixture dataset as CSV");
  gen->add_option("--n-inlier", gn.n_inlier, "Inlier count");
  gen->add_option("--n-outlier", gn.n_outlier, "Outlier count");
  gen->add_option("--dim", gn.dim, "Feature dimension");
  gen->add_option("--shift", gn.shift, "Outlier mean shift per coordinate");
  gen->add_option("--scale", gn.scale, "Outlier standard deviation");
  gen->add_option("--seed", gn.seed, "Seed");
  gen->add_option("--out", gn.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*pvalue) return cmd_pvalue(pv);
    if (*bounds) return cmd_bounds(bd);
    if (*gen) return cmd_gen(gn);
  } catch (const codcal::TrialError& e) {
    std::cerr << "codcal: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const codcal::ConfigError& e) {
    std::cerr << "codcal: config error at " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "codcal: " << e.what() << '\n';
    return kExitUsage;
  } catch (const codcal::InvalidArgument& e) {
    std::cerr << "codcal: " << e.what() << '\n';
    return kExitUsage;
  } catch (const codcal::ParseError& e) {
    std::cerr << "codcal: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "codcal: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
