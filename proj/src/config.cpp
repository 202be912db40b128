#include "magna/config.hpp"

#include <fstream>
#include <set>

namespace magna {

using nlohmann::json;

namespace {

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (it->is_number_integer() && !it->is_number_unsigned() && it->get<std::int64_t>() < 0) {
            throw ConfigError("expected a non-negative integer");
          }
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("expected a number");
      } else {
        if (!it->is_string()) throw ConfigError("expected a string");
      }
      out = it->get<T>();
    } catch (const std::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key \"" + key + "\"");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_network(const json& j, NetworkConfig& c) {
  ObjectReader r(j, "network");
  r.read("blocks", c.blocks);
  r.read("dim", c.dim);
  r.read("heads", c.heads);
  r.read("ffn_dim", c.ffn_dim);
  r.read("alpha", c.diffusion.alpha);
  r.read("hops", c.diffusion.hops);
  r.read("attention_dropout", c.attention_dropout);
  r.read("feature_dropout", c.feature_dropout);
  r.read("relation_dim", c.relation_dim);
  r.read("input_dim", c.input_dim);
  r.read("num_relations", c.num_relations);
  if (const json* ab = r.child("ablation")) {
    ObjectReader a(*ab, "network.ablation");
    a.read("no_diffusion", c.ablation.no_diffusion);
    a.read("no_layernorm", c.ablation.no_layernorm);
    a.read("no_feedforward", c.ablation.no_feedforward);
    a.finish();
  }
  r.finish();
}

void read_train(const json& j, TrainConfig& c) {
  ObjectReader r(j, "train");
  r.read("learning_rate", c.learning_rate);
  r.read("weight_decay", c.weight_decay);
  r.read("max_epochs", c.max_epochs);
  r.read("window", c.window);
  r.read("batch_size", c.batch_size);
  r.read("label_smoothing", c.label_smoothing);
  r.read("entity_dim", c.entity_dim);
  r.read("eval_every", c.eval_every);
  r.finish();
}

}  // namespace

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::node: return "node";
    case TaskKind::kg: return "kg";
    case TaskKind::analyze: return "analyze";
  }
  return "node";
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "node") return TaskKind::node;
  if (text == "kg") return TaskKind::kg;
  if (text == "analyze") return TaskKind::analyze;
  throw ConfigError("unknown task kind \"" + text + "\" (expected node, kg or analyze)");
}

int TrainConfig::resolved_max_epochs(TaskKind task) const {
  if (max_epochs > 0) return max_epochs;
  return task == TaskKind::kg ? 400 : 1000;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (max_epochs < 0) throw ConfigError("train: max_epochs must be >= 0");
  if (window < 1) throw ConfigError("train: window must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw ConfigError("train: label_smoothing must lie in [0, 1)");
  }
  if (entity_dim < 1) throw ConfigError("train: entity_dim must be >= 1");
  if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
}

void RunConfig::validate() const {
  train.validate();
  NetworkConfig probe = network;
  if (probe.input_dim < 1) probe.input_dim = 1;
  probe.validate();
}

json to_json(const NetworkConfig& c) {
  return {{"blocks", c.blocks},
          {"dim", c.dim},
          {"heads", c.heads},
          {"ffn_dim", c.resolved_ffn_dim()},
          {"alpha", c.diffusion.alpha},
          {"hops", c.diffusion.hops},
          {"attention_dropout", c.attention_dropout},
          {"feature_dropout", c.feature_dropout},
          {"relation_dim", c.relation_dim},
          {"input_dim", c.input_dim},
          {"num_relations", c.num_relations},
          {"ablation",
           {{"no_diffusion", c.ablation.no_diffusion},
            {"no_layernorm", c.ablation.no_layernorm},
            {"no_feedforward", c.ablation.no_feedforward}}}};
}

NetworkConfig network_config_from_json(const json& j) {
  NetworkConfig c;
  read_network(j, c);
  return c;
}

json to_json(const RunConfig& c) {
  return {{"task", to_string(c.task)},
          {"data", c.data},
          {"out", c.out},
          {"seed", c.train.seed},
          {"network", to_json(c.network)},
          {"train",
           {{"learning_rate", c.train.learning_rate},
            {"weight_decay", c.train.weight_decay},
            {"max_epochs", c.train.resolved_max_epochs(c.task)},
            {"window", c.train.window},
            {"batch_size", c.train.batch_size},
            {"label_smoothing", c.train.label_smoothing},
            {"entity_dim", c.train.entity_dim},
            {"eval_every", c.train.eval_every}}}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  ObjectReader r(j, "config");
  std::string task = to_string(c.task);
  r.read("task", task);
  c.task = parse_task_kind(task);
  r.read("data", c.data);
  r.read("out", c.out);
  r.read("seed", c.train.seed);
  if (const json* n = r.child("network")) read_network(*n, c.network);
  if (const json* t = r.child("train")) read_train(*t, c.train);
  r.finish();
  c.validate();
  return c;
}

json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError(file.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& file) {
  try {
    return run_config_from_json(read_json_file(file));
  } catch (const ConfigError& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& file, const json& j) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw DataError(file.string() + ": cannot write");
  out << j.dump(2) << '\n';
  if (!out) throw DataError(file.string() + ": write failed");
}

}  // namespace magna
