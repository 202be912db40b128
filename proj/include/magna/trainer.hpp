#pragma once

#include "magna/adam.hpp"
#include "magna/config.hpp"
#include "magna/network.hpp"
#include "magna/tasks.hpp"

#include "json.hpp"

#include <functional>
#include <string>
#include <vector>

namespace magna {

// Stops once `window` epochs have passed without a strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int window);

  // Returns true when training should stop after this epoch.
  bool observe(int epoch, double metric);

  int best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_; }
  bool improved() const { return improved_; }

 private:
  int window_;
  int best_epoch_ = 0;
  double best_;
  bool improved_ = false;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_metric = 0.0;  // node: train accuracy; kg: unused (NaN)
  double val_metric = 0.0;    // NaN on epochs without validation
};

struct TrainReport {
  TaskKind task = TaskKind::node;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> history;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val = 0.0;
  double test_metric = 0.0;  // node: accuracy; kg: MRR
  RankingMetrics val_ranking;   // kg only
  RankingMetrics test_ranking;  // kg only
  double wall_seconds = 0.0;

  // wall_seconds is emitted only when include_timing is set, so reports of
  // identical runs serialize identically.
  nlohmann::json to_json(bool include_timing) const;
};

struct TrainResult {
  TrainReport report;
  NetworkConfig network;   // with input_dim / num_relations filled in
  ParamStore best_params;  // parameters at the best validation epoch
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Full-graph training on the train split with validation-accuracy early
// stopping. Test accuracy is computed once, with the best parameters.
TrainResult train_node_classifier(const NodeDataset& data, NetworkConfig network,
                                  const TrainConfig& train, const EpochCallback& on_epoch = {});

// 1-N training over (h, r) query groups of the train triples and their
// reverses, validation-MRR early stopping, filtered test ranking at the end.
TrainResult train_kg(const KgDataset& kg, NetworkConfig network, const TrainConfig& train,
                     const EpochCallback& on_epoch = {});

// Logits of every node in evaluation mode.
Matrix node_logits(const MagnaNetwork& net, ParamStore& params, const NodeDataset& data);

// Encoder output for every entity in evaluation mode (entity_count x dim).
Matrix kg_entity_representations(const MagnaNetwork& net, ParamStore& params, const KgDataset& kg);
QueryScorer distmult_scorer(Matrix entities, Matrix relations);
// Filtered ranks of `triples` under the stored model.
std::vector<TripleRank> evaluate_kg(const MagnaNetwork& net, ParamStore& params, const KgDataset& kg,
                                    std::span<const Triple> triples);

// Graph used by the node model: dataset graph plus self-loops on isolated nodes.
Graph prepared_graph(const Graph& graph);

nlohmann::json checkpoint_meta(const TrainResult& result, const TrainConfig& train);

}  // namespace magna
