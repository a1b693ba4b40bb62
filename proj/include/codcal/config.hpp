#pragma once

// JSON run configuration for the `simulate` subcommand.
//
//   {
//     "seed": 7, "trials": 100, "alpha": [0.02], "budget": 50,
//     "methods": ["standard", "oracle", "naive-trim", "small-clean", "label-trim"],
//     "naive_trim": "match_rate" | {"fixed": 25},
//     "jitter": true,
//     "scorer": {"kind": "mahalanobis", "ridge": 1e-6} | {"kind": "knn", "k": 5},
//     "data": {"kind": "gaussian", "dim": 2, "shift": 3, "scale": 1}
//           | {"kind": "csv", "path": "x.csv", "label_column": "label"},
//     "split": {"train_size": 1000, "cal_size": 1000, "test_inlier_size": 500,
//               "test_outlier_size": 50, "contamination_rate": 0.03,
//               "injection": {"kind": "iid"}
//                          | {"kind": "percentile", "q": 0.5}
//                          | {"kind": "drift", "train_cal": [0.3, 1], "test": [0, 0.3]}},
//     "sweep": {"axis": "contamination_rate" | "budget" | "alpha", "values": [...]}
//   }
//
// Every key is optional except "split"; defaults match ExperimentConfig.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "codcal/error.hpp"
#include "codcal/experiments.hpp"

namespace codcal {

/// Configuration error carrying the dotted path of the offending field.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : InvalidArgument(field + ": " + message), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct SweepSpec {
  SweepAxis axis = SweepAxis::alpha;
  std::vector<double> values;
};

struct SimulationPlan {
  ExperimentConfig config;
  std::optional<SweepSpec> sweep;
  std::optional<std::uint64_t> seed;  // "seed" key, if present
};

/// Throws ConfigError on unknown keys, wrong types or out-of-domain values.
SimulationPlan parse_simulation(const nlohmann::json& doc);

/// Applies "a.b.c=value". The value is parsed as JSON when possible,
/// otherwise taken as a string. Throws ConfigError on malformed input.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Lowercase hex SHA-256 of doc.dump() (keys sorted, compact).
std::string config_hash(const nlohmann::json& doc);

}  // namespace codcal
