#pragma once

#include "magna/config.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace magna {

// One searched config entry, addressed by a dotted path into the run config
// JSON ("network.hops", "train.learning_rate").
struct SearchDimension {
  enum class Kind { fixed, range, choice };

  std::string path;
  Kind kind = Kind::fixed;
  nlohmann::json fixed;                // Kind::fixed
  double low = 0.0, high = 0.0;        // Kind::range
  bool log_scale = false;              // Kind::range
  bool integer = false;                // Kind::range with integer bounds
  std::vector<nlohmann::json> choices;  // Kind::choice

  nlohmann::json sample(std::mt19937_64& rng) const;
};

// Space file:
// {"base": {run config}, "parameters": {
//    "network.blocks": {"fixed": 2},
//    "train.learning_rate": {"range": [5e-5, 1e-3]},            // log scale by default
//    "network.feature_dropout": {"range": [0.1, 0.6], "scale": "uniform"},
//    "network.hops": {"choice": [2, 3, 4, 5, 6, 7, 8, 9, 10]}}}
// Ranges over learning_rate / weight_decay default to log scale, others to
// uniform. Integer bounds sample integers inclusively.
struct SearchSpace {
  nlohmann::json base = nlohmann::json::object();
  std::vector<SearchDimension> dimensions;

  static SearchSpace from_json(const nlohmann::json& j);
};

SearchSpace load_search_space(const std::filesystem::path& file);

struct TrialOutcome {
  double val_metric = 0.0;
  double test_metric = 0.0;
  int best_epoch = 0;
};

struct TrialResult {
  int trial = 0;
  nlohmann::json sampled;  // path -> value
  RunConfig config;
  TrialOutcome outcome;
  std::string error;  // non-empty if the trial failed
};

using TrialRunner = std::function<TrialOutcome(const RunConfig&)>;

// Samples every trial config up front from a generator seeded with `seed`,
// runs them on up to `jobs` worker threads and returns the table sorted by
// validation metric (descending; failed trials last; ties by trial index).
std::vector<TrialResult> random_search(const RunConfig& base, const SearchSpace& space, int trials,
                                       std::uint64_t seed, const TrialRunner& runner, int jobs = 1);

void write_trial_table(const std::filesystem::path& file, const std::vector<TrialResult>& table,
                       const SearchSpace& space, std::uint64_t seed);

// "network.hops" -> "/network/hops"
nlohmann::json::json_pointer config_pointer(const std::string& dotted);

}  // namespace magna
