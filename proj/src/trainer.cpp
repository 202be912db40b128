#include "magna/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace magna {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

nlohmann::json ranking_json(const RankingMetrics& m) {
  return {{"mr", m.mr}, {"mrr", m.mrr}, {"hits@1", m.hits1}, {"hits@3", m.hits3},
          {"hits@10", m.hits10}, {"count", m.count}};
}

std::vector<NodeId> require_split(const NodeDataset& data, Split split, const char* name) {
  std::vector<NodeId> nodes = data.nodes_in(split);
  if (nodes.empty()) throw DataError(std::string("node dataset has no ") + name + " nodes");
  return nodes;
}

}  // namespace

EarlyStopping::EarlyStopping(int window)
    : window_(window), best_(-std::numeric_limits<double>::infinity()) {
  if (window < 1) throw ConfigError("early stopping window must be >= 1");
}

bool EarlyStopping::observe(int epoch, double metric) {
  improved_ = metric > best_;
  if (improved_) {
    best_ = metric;
    best_epoch_ = epoch;
  }
  return epoch - best_epoch_ >= window_;
}

nlohmann::json TrainReport::to_json(bool include_timing) const {
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochRecord& r : history) {
    epochs.push_back({{"epoch", r.epoch},
                      {"train_loss", r.train_loss},
                      {"train_metric", finite_or_null(r.train_metric)},
                      {"val_metric", finite_or_null(r.val_metric)}});
  }
  nlohmann::json j = {{"task", to_string(task)},
                      {"seed", seed},
                      {"epochs_run", epochs_run},
                      {"best_epoch", best_epoch},
                      {"best_val", best_val},
                      {"test_metric", test_metric},
                      {"wall_seconds", include_timing ? nlohmann::json(wall_seconds) : nlohmann::json()},
                      {"history", std::move(epochs)}};
  if (task == TaskKind::kg) {
    j["val_ranking"] = ranking_json(val_ranking);
    j["test_ranking"] = ranking_json(test_ranking);
  }
  return j;
}

Graph prepared_graph(const Graph& graph) { return with_isolated_self_loops(graph); }

Matrix node_logits(const MagnaNetwork& net, ParamStore& params, const NodeDataset& data) {
  const Graph graph = prepared_graph(data.graph);
  ad::Tape tape(false);
  ad::Rng unused(0);
  const ad::Var h = net.forward(tape, params, tape.constant(data.features), graph, false, unused);
  return classifier_logits(tape, params, h).value();
}

TrainResult train_node_classifier(const NodeDataset& data, NetworkConfig network,
                                  const TrainConfig& train, const EpochCallback& on_epoch) {
  train.validate();
  const auto start = Clock::now();
  const std::vector<NodeId> train_nodes = require_split(data, Split::train, "train");
  const std::vector<NodeId> val_nodes = require_split(data, Split::val, "validation");
  const std::vector<NodeId> test_nodes = require_split(data, Split::test, "test");

  network.input_dim = static_cast<int>(data.features.cols());
  network.num_relations = std::max<int>(1, data.graph.num_relations());
  const MagnaNetwork net(network);
  const Graph graph = prepared_graph(data.graph);

  ad::Rng rng(train.seed);
  ParamStore params;
  net.init_params(params, rng);
  init_classifier(params, network.dim, data.num_classes, rng);
  AdamState adam;
  adam.options.learning_rate = train.learning_rate;
  adam.options.weight_decay = train.weight_decay;

  TrainResult result;
  result.network = network;
  result.report.task = TaskKind::node;
  result.report.seed = train.seed;
  EarlyStopping stopper(train.window);
  const int max_epochs = train.resolved_max_epochs(TaskKind::node);

  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    try {
      params.zero_grad();
      ad::Tape tape;
      const ad::Var h = net.forward(tape, params, tape.constant(data.features), graph, true, rng);
      const ClassificationLoss loss =
          cross_entropy_loss(classifier_logits(tape, params, h), data.labels, train_nodes);
      tape.backward(loss.loss);
      adam_step(params, adam);
      record.train_loss = loss.loss.value()(0, 0);
      record.train_metric = loss.accuracy;
      record.val_metric = classification_accuracy(node_logits(net, params, data), data.labels, val_nodes);
    } catch (const NumericError& e) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    result.report.history.push_back(record);
    if (on_epoch) on_epoch(record);
    const bool stop = stopper.observe(epoch, record.val_metric);
    if (stopper.improved()) result.best_params = params;
    result.report.epochs_run = epoch;
    if (stop) break;
  }

  result.report.best_epoch = stopper.best_epoch();
  result.report.best_val = stopper.best_metric();
  result.report.test_metric =
      classification_accuracy(node_logits(net, result.best_params, data), data.labels, test_nodes);
  result.report.wall_seconds = seconds_since(start);
  return result;
}

Matrix kg_entity_representations(const MagnaNetwork& net, ParamStore& params, const KgDataset& kg) {
  const Graph graph = prepared_graph(kg.graph);
  ad::Tape tape(false);
  ad::Rng unused(0);
  return net.forward(tape, params, tape.param(params.at("entity.embedding")), graph, false, unused).value();
}

QueryScorer distmult_scorer(Matrix entities, Matrix relations) {
  return [entities = std::move(entities), relations = std::move(relations)](std::span<const Query> queries) {
    Matrix probe(static_cast<Eigen::Index>(queries.size()), entities.cols());
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto [h, r] = queries[q];
      if (h < 0 || h >= entities.rows() || r < 0 || r >= relations.rows()) {
        throw ShapeError("distmult scorer: query (" + std::to_string(h) + ", " + std::to_string(r) +
                         ") out of range");
      }
      probe.row(static_cast<Eigen::Index>(q)) = entities.row(h).cwiseProduct(relations.row(r));
    }
    return Matrix(probe * entities.transpose());
  };
}

std::vector<TripleRank> evaluate_kg(const MagnaNetwork& net, ParamStore& params, const KgDataset& kg,
                                    std::span<const Triple> triples) {
  return filtered_ranks(kg, triples,
                        distmult_scorer(kg_entity_representations(net, params, kg),
                                        params.at("decoder.relation").value));
}

TrainResult train_kg(const KgDataset& kg, NetworkConfig network, const TrainConfig& train,
                     const EpochCallback& on_epoch) {
  train.validate();
  const auto start = Clock::now();
  if (kg.train.empty()) throw DataError("KG dataset has no train triples");
  if (kg.valid.empty()) throw DataError("KG dataset has no validation triples");
  if (kg.train_targets.empty()) throw DataError("KG dataset has no 1-N targets");

  network.input_dim = train.entity_dim;
  network.num_relations = kg.relation_count;
  const MagnaNetwork net(network);
  const Graph graph = prepared_graph(kg.graph);

  ad::Rng rng(train.seed);
  ParamStore params;
  params.add("entity.embedding", glorot_uniform(kg.entity_count, train.entity_dim, rng));
  net.init_params(params, rng);
  params.add("decoder.relation", glorot_uniform(kg.relation_count, network.dim, rng));
  AdamState adam;
  adam.options.learning_rate = train.learning_rate;
  adam.options.weight_decay = train.weight_decay;

  std::vector<Query> queries;
  queries.reserve(kg.train_targets.size());
  for (const auto& [query, tails] : kg.train_targets) queries.push_back(query);
  const auto batch = static_cast<std::size_t>(train.batch_size);

  TrainResult result;
  result.network = network;
  result.report.task = TaskKind::kg;
  result.report.seed = train.seed;
  EarlyStopping stopper(train.window);
  const int max_epochs = train.resolved_max_epochs(TaskKind::kg);

  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    std::shuffle(queries.begin(), queries.end(), rng);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    try {
      for (std::size_t begin = 0; begin < queries.size(); begin += batch) {
        const std::size_t end = std::min(queries.size(), begin + batch);
        std::vector<std::int32_t> heads;
        std::vector<std::int32_t> rels;
        std::vector<std::vector<NodeId>> tails;
        for (std::size_t q = begin; q < end; ++q) {
          heads.push_back(queries[q].first);
          rels.push_back(queries[q].second);
          tails.push_back(kg.train_targets.at(queries[q]));
        }
        params.zero_grad();
        ad::Tape tape;
        const ad::Var entities =
            net.forward(tape, params, tape.param(params.at("entity.embedding")), graph, true, rng);
        const ad::Var scores =
            distmult_scores(ad::gather_rows(entities, heads),
                            ad::gather_rows(tape.param(params.at("decoder.relation")), rels), entities);
        const ad::Var loss = kl_label_smoothing_loss(scores, tails, train.label_smoothing);
        tape.backward(loss);
        adam_step(params, adam);
        loss_sum += loss.value()(0, 0);
        ++steps;
      }
    } catch (const NumericError& e) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(steps);
    record.train_metric = kNaN;
    record.val_metric = kNaN;
    bool stop = false;
    if (epoch % train.eval_every == 0 || epoch == max_epochs) {
      RankingMetrics val;
      try {
        val = ranking_metrics(evaluate_kg(net, params, kg, kg.valid));
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      record.val_metric = val.mrr;
      stop = stopper.observe(epoch, val.mrr);
      if (stopper.improved()) {
        result.best_params = params;
        result.report.val_ranking = val;
      }
    }
    result.report.history.push_back(record);
    if (on_epoch) on_epoch(record);
    result.report.epochs_run = epoch;
    if (stop) break;
  }

  result.report.best_epoch = stopper.best_epoch();
  result.report.best_val = stopper.best_metric();
  if (!kg.test.empty()) {
    result.report.test_ranking = ranking_metrics(evaluate_kg(net, result.best_params, kg, kg.test));
    result.report.test_metric = result.report.test_ranking.mrr;
  } else {
    result.report.test_metric = kNaN;
  }
  result.report.wall_seconds = seconds_since(start);
  return result;
}

nlohmann::json checkpoint_meta(const TrainResult& result, const TrainConfig& train) {
  RunConfig run;
  run.task = result.report.task;
  run.network = result.network;
  run.train = train;
  nlohmann::json cfg = to_json(run);
  cfg.erase("data");
  cfg.erase("out");
  return {{"task", to_string(result.report.task)},
          {"seed", train.seed},
          {"best_epoch", result.report.best_epoch},
          {"val_metric", result.report.best_val},
          {"network", to_json(result.network)},
          {"config", std::move(cfg)}};
}

}  // namespace magna
