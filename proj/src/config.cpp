#include "codcal/config.hpp"

#include <cstdio>
#include <set>

#include <openssl/evp.h>

#include "codcal/error.hpp"

namespace codcal {

namespace {

using nlohmann::json;

void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) throw ConfigError(path.empty() ? k : path + "." + k, "unknown key");
  }
}

std::string join(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

double get_number(const json& obj, const std::string& path, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
  return v.get<double>();
}

std::size_t get_count(const json& obj, const std::string& path, const char* key, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(join(path, key), "expected a nonnegative integer");
  }
  return v.get<std::size_t>();
}

std::string get_string(const json& obj, const std::string& path, const char* key, std::string fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(join(path, key), "expected a string");
  return v.get<std::string>();
}

std::vector<double> get_number_list(const json& v, const std::string& path) {
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) throw ConfigError(path, "expected a number or array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(path, "expected numbers only");
    out.push_back(e.get<double>());
  }
  return out;
}

PercentileBand get_band(const json& obj, const std::string& path, const char* key, PercentileBand fallback) {
  if (!obj.contains(key)) return fallback;
  const auto values = get_number_list(obj.at(key), join(path, key));
  if (values.size() != 2) throw ConfigError(join(path, key), "expected [lo, hi]");
  return {values[0], values[1]};
}

Injection parse_injection(const json& j, const std::string& path) {
  const std::string kind = get_string(j, path, "kind", "iid");
  if (kind == "iid") {
    allow_keys(j, path, {"kind"});
    return IidInjection{};
  }
  if (kind == "percentile") {
    allow_keys(j, path, {"kind", "q"});
    return PercentileInjection{get_number(j, path, "q", 1.0)};
  }
  if (kind == "drift") {
    allow_keys(j, path, {"kind", "train_cal", "test"});
    DriftInjection d;
    d.train_cal = get_band(j, path, "train_cal", d.train_cal);
    d.test = get_band(j, path, "test", d.test);
    return d;
  }
  throw ConfigError(join(path, "kind"), "unknown injection '" + kind + "'");
}

SplitSpec parse_split(const json& j) {
  const std::string path = "split";
  allow_keys(j, path,
             {"train_size", "cal_size", "test_inlier_size", "test_outlier_size", "contamination_rate", "injection"});
  SplitSpec s;
  s.train_size = get_count(j, path, "train_size", 0);
  s.cal_size = get_count(j, path, "cal_size", 0);
  s.test_inlier_size = get_count(j, path, "test_inlier_size", 0);
  s.test_outlier_size = get_count(j, path, "test_outlier_size", 0);
  s.contamination_rate = get_number(j, path, "contamination_rate", 0.0);
  if (j.contains("injection")) s.injection = parse_injection(j.at("injection"), "split.injection");
  return s;
}

ScorerSpec parse_scorer(const json& j) {
  const std::string path = "scorer";
  allow_keys(j, path, {"kind", "k", "ridge"});
  ScorerSpec s;
  const std::string kind = get_string(j, path, "kind", "mahalanobis");
  if (kind == "knn") {
    s.kind = Scorer::Kind::knn;
  } else if (kind == "mahalanobis") {
    s.kind = Scorer::Kind::mahalanobis;
  } else {
    throw ConfigError("scorer.kind", "unknown scorer '" + kind + "'");
  }
  s.k = get_count(j, path, "k", s.k);
  s.ridge = get_number(j, path, "ridge", s.ridge);
  return s;
}

DataSource parse_data(const json& j) {
  const std::string path = "data";
  const std::string kind = get_string(j, path, "kind", "gaussian");
  if (kind == "gaussian") {
    allow_keys(j, path, {"kind", "dim", "shift", "scale", "inlier_pool", "outlier_pool"});
    GaussianSource g;
    g.dim = get_count(j, path, "dim", g.dim);
    g.shift = get_number(j, path, "shift", g.shift);
    g.scale = get_number(j, path, "scale", g.scale);
    g.inlier_pool = get_count(j, path, "inlier_pool", 0);
    g.outlier_pool = get_count(j, path, "outlier_pool", 0);
    return g;
  }
  if (kind == "csv") {
    allow_keys(j, path, {"kind", "path", "label_column"});
    CsvSource c;
    c.path = get_string(j, path, "path", "");
    c.label_column = get_string(j, path, "label_column", c.label_column);
    return c;
  }
  throw ConfigError("data.kind", "unknown data source '" + kind + "'");
}

}  // namespace

SimulationPlan parse_simulation(const json& doc) {
  allow_keys(doc, "", {"seed", "trials", "alpha", "budget", "methods", "naive_trim", "jitter", "scorer", "data",
                       "split", "sweep"});
  if (!doc.contains("split")) throw ConfigError("split", "required");
  SimulationPlan plan;
  ExperimentConfig& c = plan.config;
  if (doc.contains("seed")) {
    const json& s = doc.at("seed");
    if (!s.is_number_integer()) throw ConfigError("seed", "expected an integer");
    plan.seed = s.is_number_unsigned() ? s.get<std::uint64_t>()
                                       : static_cast<std::uint64_t>(s.get<std::int64_t>());
  }
  c.trials = get_count(doc, "", "trials", c.trials);
  if (doc.contains("alpha")) c.alphas = get_number_list(doc.at("alpha"), "alpha");
  c.budget = get_count(doc, "", "budget", c.budget);
  if (doc.contains("methods")) {
    const json& ms = doc.at("methods");
    if (!ms.is_array()) throw ConfigError("methods", "expected an array of method names");
    c.methods.clear();
    for (const auto& m : ms) {
      const auto parsed = m.is_string() ? parse_method(m.get<std::string>()) : std::nullopt;
      if (!parsed) throw ConfigError("methods", "unknown method " + m.dump());
      c.methods.push_back(*parsed);
    }
  }
  if (doc.contains("naive_trim")) {
    const json& n = doc.at("naive_trim");
    if (n.is_string() && n.get<std::string>() == "match_rate") {
      c.naive_trim = {true, 0};
    } else if (n.is_object()) {
      allow_keys(n, "naive_trim", {"fixed"});
      c.naive_trim = {false, get_count(n, "naive_trim", "fixed", 0)};
    } else {
      throw ConfigError("naive_trim", "expected \"match_rate\" or {\"fixed\": k}");
    }
  }
  if (doc.contains("jitter")) {
    if (!doc.at("jitter").is_boolean()) throw ConfigError("jitter", "expected true or false");
    c.jitter = doc.at("jitter").get<bool>();
  }
  if (doc.contains("scorer")) c.scorer = parse_scorer(doc.at("scorer"));
  if (doc.contains("data")) c.data = parse_data(doc.at("data"));
  c.split = parse_split(doc.at("split"));
  if (plan.seed) c.master_seed = *plan.seed;

  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    allow_keys(s, "sweep", {"axis", "values"});
    const auto axis = parse_axis(get_string(s, "sweep", "axis", ""));
    if (!axis) throw ConfigError("sweep.axis", "expected contamination_rate, budget or alpha");
    if (!s.contains("values")) throw ConfigError("sweep.values", "required");
    SweepSpec spec{*axis, get_number_list(s.at("values"), "sweep.values")};
    if (spec.values.empty()) throw ConfigError("sweep.values", "must be nonempty");
    plan.sweep = std::move(spec);
  }

  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    // validate() messages start with the field path.
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    throw ConfigError(msg.substr(0, colon), colon == std::string::npos ? msg : msg.substr(colon + 2));
  }
  return plan;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError(key, "empty path component");
    if (!node->is_object()) throw ConfigError(key, "path crosses a non-object value");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

std::string config_hash(const json& doc) {
  const std::string text = doc.dump();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw NumericalFailure("SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace codcal
