#include "doctest.h"

#include "magna/synthetic.hpp"
#include "magna/trainer.hpp"
#include "support/scratch.hpp"

#include <cmath>

using namespace magna;
using magna::testing::ScratchDir;

namespace {

// Two classes of ten nodes; each class is a ring and features carry the class
// sign plus a small per-node offset, so a linear readout separates them.
NodeDataset separable_toy() {
  NodeDataset d;
  const int n = 20;
  std::vector<Edge> edges;
  for (int c = 0; c < 2; ++c) {
    for (int k = 0; k < 10; ++k) {
      const int a = 10 * c + k;
      const int b = 10 * c + (k + 1) % 10;
      edges.push_back({a, 0, b});
      edges.push_back({b, 0, a});
    }
  }
  d.graph = Graph::build(n, 1, edges, false);
  d.features = Matrix::Zero(n, 3);
  d.labels.resize(n);
  d.splits.resize(n);
  for (int v = 0; v < n; ++v) {
    const int c = v / 10;
    d.labels[static_cast<std::size_t>(v)] = c;
    d.features(v, 0) = c == 0 ? 1.0 : -1.0;
    d.features(v, 1) = 0.1 * (v % 10);
    d.features(v, 2) = 1.0;
    const int k = v % 10;
    d.splits[static_cast<std::size_t>(v)] = k < 6 ? Split::train : (k < 8 ? Split::val : Split::test);
  }
  d.num_classes = 2;
  return d;
}

NetworkConfig tiny_network() {
  NetworkConfig c;
  c.blocks = 1;
  c.dim = 8;
  c.heads = 2;
  c.relation_dim = 4;
  c.diffusion = {0.2, 3};
  return c;
}

TrainConfig quick_train(int epochs) {
  TrainConfig t;
  t.learning_rate = 0.01;
  t.weight_decay = 0.0;
  t.max_epochs = epochs;
  t.window = epochs;
  t.seed = 3;
  return t;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("early stopping rule") {
  EarlyStopping stop(1);
  CHECK_FALSE(stop.observe(1, 0.5));
  CHECK(stop.improved());
  CHECK(stop.observe(2, 0.5));
  CHECK_FALSE(stop.improved());
  CHECK(stop.best_epoch() == 1);

  EarlyStopping patient(3);
  CHECK_FALSE(patient.observe(1, 0.1));
  CHECK_FALSE(patient.observe(2, 0.2));
  CHECK_FALSE(patient.observe(3, 0.2));
  CHECK_FALSE(patient.observe(4, 0.15));
  CHECK(patient.observe(5, 0.2));
  CHECK(patient.best_metric() == 0.2);
  CHECK_THROWS_AS(EarlyStopping(0), ConfigError);
}

TEST_CASE("separable toy graph is fit within 200 epochs") {
  const NodeDataset data = separable_toy();
  TrainConfig train = quick_train(200);
  int first_perfect = 0;
  const TrainResult r = train_node_classifier(data, tiny_network(), train, [&](const EpochRecord& e) {
    if (first_perfect == 0 && e.train_metric == 1.0) first_perfect = e.epoch;
  });
  CHECK(first_perfect > 0);
  CHECK(first_perfect <= 200);
  CHECK(r.report.best_val == 1.0);
  CHECK(r.report.test_metric == 1.0);
}

TEST_CASE("window one stops at epoch two when validation stalls") {
  NodeDataset data = separable_toy();
  // Constant features: every node gets the same logits, validation accuracy cannot move.
  data.features.setOnes();
  TrainConfig train = quick_train(50);
  train.window = 1;
  const TrainResult r = train_node_classifier(data, tiny_network(), train);
  CHECK(r.report.epochs_run == 2);
  CHECK(r.report.best_epoch == 1);
}

TEST_CASE("same seed gives identical reports and checkpoints reproduce validation") {
  const NodeDataset data = separable_toy();
  const TrainConfig train = quick_train(30);
  const TrainResult a = train_node_classifier(data, tiny_network(), train);
  const TrainResult b = train_node_classifier(data, tiny_network(), train);
  CHECK(a.report.to_json(false).dump() == b.report.to_json(false).dump());
  CHECK(a.report.to_json(false)["wall_seconds"].is_null());
  CHECK(a.report.to_json(true)["wall_seconds"].is_number());

  TrainConfig other = train;
  other.seed = 4;
  CHECK(train_node_classifier(data, tiny_network(), other).report.to_json(false) != a.report.to_json(false));

  ScratchDir dir("trainer_ckpt");
  save_checkpoint(dir / "ckpt.json", a.best_params, checkpoint_meta(a, train));
  nlohmann::json meta;
  ParamStore loaded = load_checkpoint(dir / "ckpt.json", &meta);
  const MagnaNetwork net(network_config_from_json(meta["network"]));
  const double val = classification_accuracy(node_logits(net, loaded, data), data.labels, data.nodes_in(Split::val));
  CHECK(val == a.report.best_val);
  CHECK(meta["best_epoch"] == a.report.best_epoch);
}

TEST_CASE("missing splits are rejected") {
  NodeDataset data = separable_toy();
  for (Split& s : data.splits) {
    if (s == Split::test) s = Split::none;
  }
  CHECK_THROWS_AS(train_node_classifier(data, tiny_network(), quick_train(5)), DataError);
}

TEST_CASE("divergence aborts with the epoch") {
  const NodeDataset data = separable_toy();
  TrainConfig train = quick_train(20);
  train.learning_rate = 1e300;
  try {
    train_node_classifier(data, tiny_network(), train);
    FAIL("expected divergence");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("training diverged at epoch") != std::string::npos);
  }
}

TEST_CASE("compositional toy KG is learned") {
  const KgDataset kg = compositional_kg({});
  NetworkConfig net = tiny_network();
  net.dim = 32;
  net.heads = 4;
  net.relation_dim = 16;
  net.diffusion = {0.5, 4};
  net.feature_dropout = 0.5;
  TrainConfig train;
  train.learning_rate = 0.005;
  train.weight_decay = 1e-4;
  train.max_epochs = 800;
  train.window = 800;
  train.entity_dim = 32;
  train.eval_every = 10;
  train.seed = 0;
  const TrainResult r = train_kg(kg, net, train);
  CHECK(r.report.best_val > 0.9);
  CHECK(r.report.val_ranking.count == 2 * kg.valid.size());
  CHECK(std::isnan(r.report.history.front().val_metric));
}

TEST_CASE("KG batches, determinism and reload") {
  const KgDataset kg = compositional_kg({4, 1, 0});
  NetworkConfig net = tiny_network();
  TrainConfig train;
  train.max_epochs = 4;
  train.window = 4;
  train.entity_dim = 8;
  train.batch_size = static_cast<int>(kg.train_targets.size());
  const TrainResult one = train_kg(kg, net, train);
  // Any batch at least as large as the query count is the same single step.
  train.batch_size = 100000;
  const TrainResult same = train_kg(kg, net, train);
  CHECK(one.report.to_json(false) == same.report.to_json(false));
  train.batch_size = 2;
  CHECK(train_kg(kg, net, train).report.to_json(false) != one.report.to_json(false));

  ScratchDir dir("trainer_kg");
  save_checkpoint(dir / "ckpt.json", one.best_params, checkpoint_meta(one, train));
  nlohmann::json meta;
  ParamStore loaded = load_checkpoint(dir / "ckpt.json", &meta);
  const MagnaNetwork model(network_config_from_json(meta["network"]));
  const RankingMetrics val = ranking_metrics(evaluate_kg(model, loaded, kg, kg.valid));
  CHECK(val.mrr == one.report.best_val);
}

}  // TEST_SUITE
