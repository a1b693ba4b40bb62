#include "codcal/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "codcal/error.hpp"
#include "codcal/rng.hpp"

namespace codcal {

namespace {

// Role keys for split sub-streams.
constexpr std::uint64_t kRoleTrain = 0x747261696eULL;
constexpr std::uint64_t kRoleCal = 0x63616cULL;
constexpr std::uint64_t kRoleTestInlier = 0x74696eULL;
constexpr std::uint64_t kRoleTestOutlier = 0x746f7574ULL;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

// Data row r (0-based) sits on file line r + 2.
std::size_t line_of(std::size_t row) { return row + 2; }

// Pool positions eligible under band (lo, hi] of the lower empirical quantile.
std::vector<std::size_t> band_members(std::span<const double> scores, PercentileBand band) {
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<std::size_t> out;
  if (n == 0) return out;
  const double upper = sorted[lower_quantile_rank(band.hi, n) - 1];
  const bool open_below = band.lo > 0.0;
  const double lower = open_below ? sorted[lower_quantile_rank(band.lo, n) - 1] : 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] <= upper && (!open_below || scores[i] > lower)) out.push_back(i);
  }
  return out;
}

// Draw `count` entries of `available` (removing them) using `rng`.
// Partial Fisher-Yates on `available` itself; the remainder stays in a
// deterministic (permuted) order.
std::vector<std::size_t> draw(std::vector<std::size_t>& available, std::size_t count, Rng& rng) {
  const std::size_t n = available.size();
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(available[i], available[j]);
  }
  std::vector<std::size_t> chosen(available.begin(), available.begin() + static_cast<std::ptrdiff_t>(count));
  available.erase(available.begin(), available.begin() + static_cast<std::ptrdiff_t>(count));
  return chosen;
}

void remove_all(std::vector<std::size_t>& from, const std::vector<std::size_t>& used) {
  std::vector<std::size_t> sorted_used = used;
  std::sort(sorted_used.begin(), sorted_used.end());
  std::erase_if(from, [&](std::size_t i) {
    return std::binary_search(sorted_used.begin(), sorted_used.end(), i);
  });
}

struct RoleDraw {
  std::vector<std::size_t> inliers;
  std::vector<std::size_t> outliers;
};

LabeledDataset assemble(const LabeledDataset& inlier_pool, const LabeledDataset& outlier_pool,
                        const RoleDraw& draw_result, Rng& rng, std::string name,
                        std::vector<std::size_t>& source) {
  const std::size_t total = draw_result.inliers.size() + draw_result.outliers.size();
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  rng.shuffle(order);

  std::size_t dim = inlier_pool.points.dim();
  if (dim == 0) dim = outlier_pool.points.dim();
  LabeledDataset out{FeatureMatrix(dim), {}, std::move(name)};
  out.points.reserve(total);
  out.labels.reserve(total);
  source.clear();
  source.reserve(total);
  for (std::size_t slot : order) {
    if (slot < draw_result.inliers.size()) {
      const std::size_t idx = draw_result.inliers[slot];
      out.points.append(inlier_pool.points.row(idx));
      out.labels.push_back(kInlier);
      source.push_back(idx);
    } else {
      const std::size_t idx = draw_result.outliers[slot - draw_result.inliers.size()];
      out.points.append(outlier_pool.points.row(idx));
      out.labels.push_back(kOutlier);
      source.push_back(idx);
    }
  }
  return out;
}

void require_pool(const std::vector<std::size_t>& available, std::size_t need, const char* pool) {
  if (available.size() < need) {
    throw InvalidArgument(std::string("make_splits: ") + pool + " too small: need " +
                          std::to_string(need) + ", have " + std::to_string(available.size()));
  }
}

}  // namespace

std::size_t LabeledDataset::outlier_count() const noexcept {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kOutlier));
}

LabeledDataset LabeledDataset::with_label(Label label) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) idx.push_back(i);
  return {points.select(idx), std::vector<Label>(idx.size(), label), name};
}

LabeledDataset gen_gaussian_mixture(std::size_t n_inlier, std::size_t n_outlier, std::size_t dim,
                                    double shift, double scale, std::uint64_t seed) {
  if (dim == 0) throw InvalidArgument("gen_gaussian_mixture: dimension must be >= 1");
  if (!(scale > 0.0)) throw InvalidArgument("gen_gaussian_mixture: scale must be positive");
  Rng rng(seed);
  std::vector<double> values((n_inlier + n_outlier) * dim);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n_inlier * dim; ++i) values[pos++] = rng.normal();
  for (std::size_t i = 0; i < n_outlier * dim; ++i) values[pos++] = shift + scale * rng.normal();

  LabeledDataset out{FeatureMatrix(dim, std::move(values)), {}, "gaussian_mixture"};
  out.labels.assign(n_inlier, kInlier);
  out.labels.insert(out.labels.end(), n_outlier, kOutlier);
  return out;
}

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<double> CsvTable::numeric_column(std::size_t col) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double v = 0.0;
    if (!parse_double(rows[r][col], v)) {
      throw ParseError("line " + std::to_string(line_of(r)) + ", column '" + header[col] +
                           "': not a finite number: '" + rows[r][col] + "'",
                       line_of(r), header[col]);
    }
    out.push_back(v);
  }
  return out;
}

CsvTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) return table;
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  table.header = split_line(line);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != table.header.size()) {
      throw ParseError("line " + std::to_string(line_of(row)) + ": expected " +
                           std::to_string(table.header.size()) + " cells, got " +
                           std::to_string(cells.size()),
                       line_of(row), "");
    }
    table.rows.push_back(std::move(cells));
    ++row;
  }
  return table;
}

LabeledDataset load_csv_dataset(const std::filesystem::path& path, const std::string& label_column) {
  const CsvTable table = read_csv_table(path);
  const auto label_col = table.column(label_column);
  if (!label_col) {
    throw ParseError("label column '" + label_column + "' not found in '" + path.string() + "'", 1,
                     label_column);
  }
  const std::size_t dim = table.header.size() - 1;
  if (dim == 0) throw ParseError("no feature columns in '" + path.string() + "'", 1, "");

  LabeledDataset out{FeatureMatrix(dim), {}, path.stem().string()};
  out.points.reserve(table.rows.size());
  std::vector<double> features(dim);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    const std::string& lab = cells[*label_col];
    if (lab != "0" && lab != "1") {
      throw ParseError("line " + std::to_string(line_of(r)) + ", column '" + label_column +
                           "': label must be 0 or 1, got '" + lab + "'",
                       line_of(r), label_column);
    }
    out.labels.push_back(lab == "1" ? kOutlier : kInlier);
    std::size_t f = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == *label_col) continue;
      if (!parse_double(cells[c], features[f])) {
        throw ParseError("line " + std::to_string(line_of(r)) + ", column '" + table.header[c] +
                             "': not a finite number: '" + cells[c] + "'",
                         line_of(r), table.header[c]);
      }
      ++f;
    }
    out.points.append(features);
  }
  return out;
}

void write_csv_dataset(const std::filesystem::path& path, const LabeledDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  const std::size_t d = data.points.dim();
  for (std::size_t j = 0; j < d; ++j) out << 'x' << j << ',';
  out << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data.points.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", row[j]);
      out << buf << ',';
    }
    out << static_cast<int>(data.labels[i]) << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

bool injection_needs_scores(const Injection& injection) noexcept {
  return !std::holds_alternative<IidInjection>(injection);
}

void SplitSpec::validate() const {
  if (!(contamination_rate >= 0.0 && contamination_rate < 1.0)) {
    throw InvalidArgument("contamination_rate must lie in [0, 1)");
  }
  auto check_band = [](PercentileBand b, const char* what) {
    if (!(b.lo >= 0.0 && b.lo < b.hi && b.hi <= 1.0)) {
      throw InvalidArgument(std::string(what) + " band must satisfy 0 <= lo < hi <= 1");
    }
  };
  if (const auto* p = std::get_if<PercentileInjection>(&injection)) {
    if (!(p->q > 0.0 && p->q <= 1.0)) throw InvalidArgument("percentile threshold must lie in (0, 1]");
  } else if (const auto* d = std::get_if<DriftInjection>(&injection)) {
    check_band(d->train_cal, "drift train_cal");
    check_band(d->test, "drift test");
  }
}

std::size_t contaminated_outlier_count(double rate, std::size_t size) noexcept {
  return static_cast<std::size_t>(std::floor(rate * static_cast<double>(size) + 0.5));
}

std::size_t lower_quantile_rank(double q, std::size_t n) noexcept {
  if (n == 0) return 0;
  const double p = q * static_cast<double>(n);
  const double nearest = std::round(p);
  double rank = std::abs(p - nearest) <= 1e-9 * std::max(1.0, p) ? nearest : std::ceil(p);
  rank = std::clamp(rank, 1.0, static_cast<double>(n));
  return static_cast<std::size_t>(rank);
}

Splits make_splits(const LabeledDataset& inlier_pool, const LabeledDataset& outlier_pool,
                   const SplitSpec& spec, std::optional<std::span<const double>> outlier_pool_scores) {
  spec.validate();
  if (injection_needs_scores(spec.injection)) {
    if (!outlier_pool_scores) {
      throw InvalidArgument("make_splits: percentile/drift injection needs outlier pool scores");
    }
    if (outlier_pool_scores->size() != outlier_pool.size()) {
      throw InvalidArgument("make_splits: outlier score count does not match outlier pool");
    }
  }

  const std::size_t train_out = contaminated_outlier_count(spec.contamination_rate, spec.train_size);
  const std::size_t cal_out = contaminated_outlier_count(spec.contamination_rate, spec.cal_size);
  const std::size_t train_in = spec.train_size - train_out;
  const std::size_t cal_in = spec.cal_size - cal_out;

  std::vector<std::size_t> inliers(inlier_pool.size());
  for (std::size_t i = 0; i < inliers.size(); ++i) inliers[i] = i;
  require_pool(inliers, train_in + cal_in + spec.test_inlier_size, "inlier pool");

  // Contamination-eligible and test-eligible outlier positions.
  std::vector<std::size_t> contam_ok;
  std::vector<std::size_t> test_ok;
  if (const auto* p = std::get_if<PercentileInjection>(&spec.injection)) {
    contam_ok = band_members(*outlier_pool_scores, {0.0, p->q});
  } else if (const auto* d = std::get_if<DriftInjection>(&spec.injection)) {
    contam_ok = band_members(*outlier_pool_scores, d->train_cal);
    test_ok = band_members(*outlier_pool_scores, d->test);
  } else {
    contam_ok.resize(outlier_pool.size());
    for (std::size_t i = 0; i < contam_ok.size(); ++i) contam_ok[i] = i;
  }
  if (!std::holds_alternative<DriftInjection>(spec.injection)) {
    test_ok.resize(outlier_pool.size());
    for (std::size_t i = 0; i < test_ok.size(); ++i) test_ok[i] = i;
  }
  require_pool(contam_ok, train_out + cal_out, "outlier pool (contamination-eligible)");

  Rng train_rng(derive_seed(spec.seed, kRoleTrain));
  Rng cal_rng(derive_seed(spec.seed, kRoleCal));
  Rng test_in_rng(derive_seed(spec.seed, kRoleTestInlier));
  Rng test_out_rng(derive_seed(spec.seed, kRoleTestOutlier));

  RoleDraw train{draw(inliers, train_in, train_rng), draw(contam_ok, train_out, train_rng)};
  RoleDraw cal{draw(inliers, cal_in, cal_rng), draw(contam_ok, cal_out, cal_rng)};
  remove_all(test_ok, train.outliers);
  remove_all(test_ok, cal.outliers);
  require_pool(test_ok, spec.test_outlier_size, "outlier pool (test-eligible)");
  RoleDraw test_in{draw(inliers, spec.test_inlier_size, test_in_rng), {}};
  RoleDraw test_out{{}, draw(test_ok, spec.test_outlier_size, test_out_rng)};

  Splits s;
  s.train = assemble(inlier_pool, outlier_pool, train, train_rng, "train", s.train_source);
  s.cal = assemble(inlier_pool, outlier_pool, cal, cal_rng, "cal", s.cal_source);
  s.test_inlier = assemble(inlier_pool, outlier_pool, test_in, test_in_rng, "test_inlier",
                           s.test_inlier_source);
  s.test_outlier = assemble(inlier_pool, outlier_pool, test_out, test_out_rng, "test_outlier",
                            s.test_outlier_source);
  return s;
}

Splits make_splits(const LabeledDataset& inlier_pool, const LabeledDataset& outlier_pool,
                   const SplitSpec& spec, const Scorer* scorer_for_percentile) {
  if (!injection_needs_scores(spec.injection)) {
    return make_splits(inlier_pool, outlier_pool, spec, std::nullopt);
  }
  if (scorer_for_percentile == nullptr) {
    throw InvalidArgument("make_splits: percentile/drift injection needs a scorer");
  }
  const std::vector<double> scores = score_batch(*scorer_for_percentile, outlier_pool.points);
  return make_splits(inlier_pool, outlier_pool, spec, std::span<const double>(scores));
}

}  // namespace codcal
