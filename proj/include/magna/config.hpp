#pragma once

#include "magna/network.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace magna {

enum class TaskKind { node, kg, analyze };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& text);

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  int max_epochs = 0;  // 0: 1000 for node classification, 400 for KG completion
  int window = 200;
  std::uint64_t seed = 0;
  int batch_size = 1024;         // (h, r) query groups per KG step
  double label_smoothing = 0.1;  // KG only
  int entity_dim = 100;          // KG input embedding width
  int eval_every = 1;            // KG validation interval in epochs

  int resolved_max_epochs(TaskKind task) const;
  void validate() const;
};

struct RunConfig {
  TaskKind task = TaskKind::node;
  std::string data;
  std::string out;
  NetworkConfig network;
  TrainConfig train;

  void validate() const;
};

// Config JSON schema (every key optional, unknown keys rejected):
// {
//   "task": "node" | "kg" | "analyze", "data": path, "out": path, "seed": uint,
//   "network": {"blocks", "dim", "heads", "ffn_dim", "alpha", "hops",
//               "attention_dropout", "feature_dropout", "relation_dim",
//               "input_dim", "num_relations",
//               "ablation": {"no_diffusion", "no_layernorm", "no_feedforward"}},
//   "train": {"learning_rate", "weight_decay", "max_epochs", "window",
//             "batch_size", "label_smoothing", "entity_dim", "eval_every"}
// }
// input_dim and num_relations are overwritten from the dataset at run time.
nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& file);

nlohmann::json to_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(const nlohmann::json& j);

// Reads a whole JSON file with a path-prefixed error on failure.
nlohmann::json read_json_file(const std::filesystem::path& file);
// Pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& file, const nlohmann::json& j);

}  // namespace magna
