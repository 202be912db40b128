#include "doctest.h"

#include "magna/search.hpp"
#include "support/scratch.hpp"

#include <cmath>
#include <set>

using namespace magna;
using nlohmann::json;
using magna::testing::ScratchDir;

namespace {

// Deterministic stand-in for a training run: the score depends on the
// sampled config only.
TrialOutcome fake_run(const RunConfig& c) {
  TrialOutcome o;
  o.val_metric = -std::abs(std::log10(c.train.learning_rate) + 3.5) + 0.01 * c.network.diffusion.hops;
  o.test_metric = o.val_metric / 2;
  o.best_epoch = c.network.diffusion.hops;
  return o;
}

}  // namespace

TEST_SUITE("search") {

TEST_CASE("fixed parameters give identical trials") {
  const SearchSpace space = SearchSpace::from_json(
      json::parse(R"({"parameters": {"network.hops": {"fixed": 4}, "train.learning_rate": {"fixed": 0.002}}})"));
  const auto table = random_search(RunConfig{}, space, 5, 7, fake_run);
  REQUIRE(table.size() == 5);
  for (const TrialResult& t : table) {
    CHECK(t.config.network.diffusion.hops == 4);
    CHECK(t.config.train.learning_rate == 0.002);
    CHECK(t.outcome.val_metric == table[0].outcome.val_metric);
  }
  // Equal scores keep trial order.
  for (std::size_t i = 0; i < table.size(); ++i) CHECK(table[i].trial == static_cast<int>(i));
}

TEST_CASE("choice and range sampling") {
  const SearchSpace space = SearchSpace::from_json(json::parse(R"({"parameters": {
      "network.hops": {"choice": [2, 3, 4, 5, 6, 7, 8, 9, 10]},
      "train.learning_rate": {"range": [5e-5, 1e-3]},
      "network.feature_dropout": {"range": [0.1, 0.6]},
      "network.blocks": {"range": [2, 4]}}})"));
  CHECK(space.dimensions.size() == 4);
  const auto table = random_search(RunConfig{}, space, 200, 11, fake_run);
  std::set<int> hops, blocks;
  int low_decade = 0;
  for (const TrialResult& t : table) {
    hops.insert(t.config.network.diffusion.hops);
    blocks.insert(t.config.network.blocks);
    const double lr = t.config.train.learning_rate;
    CHECK(lr >= 5e-5);
    CHECK(lr <= 1e-3);
    if (lr < 2.236e-4) ++low_decade;  // geometric midpoint
    CHECK(t.config.network.feature_dropout >= 0.1);
    CHECK(t.config.network.feature_dropout <= 0.6);
    CHECK(t.sampled["network.hops"].is_number_integer());
  }
  CHECK(hops == std::set<int>{2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(blocks == std::set<int>{2, 3, 4});
  // Log-uniform puts about half the mass below the geometric midpoint.
  CHECK(low_decade > 70);
  CHECK(low_decade < 130);
  for (std::size_t i = 1; i < table.size(); ++i) CHECK(table[i - 1].outcome.val_metric >= table[i].outcome.val_metric);
}

TEST_CASE("invalid spaces are rejected") {
  for (const char* text : {R"({"parameters": {"train.learning_rate": {"range": [1e-3, 1e-5]}}})",
                           R"({"parameters": {"train.weight_decay": {"range": [0, 1e-3]}}})",
                           R"({"parameters": {"network.hops": {"choice": []}}})",
                           R"({"parameters": {"network.hops": {"fixed": 2, "choice": [3]}}})",
                           R"({"parameters": {"network.hops": {"range": [1, 2], "scale": "cubic"}}})",
                           R"({"space": {}})"}) {
    INFO(text);
    CHECK_THROWS_AS(SearchSpace::from_json(json::parse(text)), ConfigError);
  }
}

TEST_CASE("unknown config paths are rejected before any trial runs") {
  const SearchSpace space =
      SearchSpace::from_json(json::parse(R"({"parameters": {"network.nonsense": {"fixed": 1}}})"));
  int calls = 0;
  CHECK_THROWS_AS(random_search(RunConfig{}, space, 2, 1, [&](const RunConfig& c) { ++calls; return fake_run(c); }),
                  ConfigError);
  CHECK(calls == 0);
}

TEST_CASE("results do not depend on the worker count") {
  const SearchSpace space = SearchSpace::from_json(json::parse(R"({"parameters": {
      "network.hops": {"choice": [2, 4, 6, 8, 10]},
      "train.learning_rate": {"range": [5e-5, 1e-3]}}})"));
  const auto serial = random_search(RunConfig{}, space, 16, 5, fake_run, 1);
  const auto parallel = random_search(RunConfig{}, space, 16, 5, fake_run, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].trial == parallel[i].trial);
    CHECK(serial[i].sampled == parallel[i].sampled);
    CHECK(serial[i].outcome.val_metric == parallel[i].outcome.val_metric);
  }
  const auto reseeded = random_search(RunConfig{}, space, 16, 6, fake_run, 1);
  bool differs = false;
  for (std::size_t i = 0; i < serial.size(); ++i) differs |= serial[i].sampled != reseeded[i].sampled;
  CHECK(differs);

  ScratchDir dir("search_table");
  write_trial_table(dir / "trials.csv", serial, space, 5);
  const std::string csv = magna::testing::read_text(dir / "trials.csv");
  CHECK(csv.rfind("# seed=5\n", 0) == 0);
  CHECK(csv.find("network.hops") != std::string::npos);
}

TEST_CASE("dotted paths map to JSON pointers") {
  CHECK(config_pointer("network.hops").to_string() == "/network/hops");
  CHECK_THROWS_AS(config_pointer(""), ConfigError);
}

}  // TEST_SUITE
