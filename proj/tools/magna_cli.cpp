// magna: train, evaluate and analyze attention-diffusion graph networks.

#include "magna/analysis.hpp"
#include "magna/config.hpp"
#include "magna/search.hpp"
#include "magna/synthetic.hpp"
#include "magna/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace magna;

namespace {

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " is required");
  if (!fs::is_directory(path)) throw DataError(std::string(what) + " " + path + ": no such directory");
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw DataError(std::string(what) + " " + path + ": no such file");
}

struct TrainFlags {
  std::string data;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool timing = false;
  bool verbose = false;
};

RunConfig resolve_run_config(const TrainFlags& f, TaskKind task) {
  RunConfig run;
  if (!f.config.empty()) run = load_run_config(f.config);
  run.task = task;
  if (!f.data.empty()) run.data = f.data;
  if (!f.out.empty()) run.out = f.out;
  if (f.seed) run.train.seed = *f.seed;
  require_dir(run.data, "dataset directory");
  if (run.out.empty()) throw ConfigError("output directory is required");
  run.validate();
  return run;
}

EpochCallback progress(bool verbose) {
  if (!verbose) return {};
  return [](const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << " loss " << r.train_loss << " val " << r.val_metric << '\n';
  };
}

TrainResult run_training(const RunConfig& run, bool verbose) {
  if (run.task == TaskKind::kg) {
    return train_kg(load_kg_dataset(run.data), run.network, run.train, progress(verbose));
  }
  return train_node_classifier(load_node_dataset(run.data), run.network, run.train, progress(verbose));
}

json metrics_json(const TrainResult& r, bool timing) {
  return {{"task", to_string(r.report.task)},
          {"seed", r.report.seed},
          {"best_epoch", r.report.best_epoch},
          {"val_metric", r.report.best_val},
          {"test_metric", r.report.test_metric},
          {"wall_seconds", timing ? json(r.report.wall_seconds) : json()}};
}

// Writes config snapshot, checkpoint, train report and metrics.json into out.
void write_run_outputs(const RunConfig& run, const TrainResult& result, const fs::path& out, bool timing) {
  RunConfig snapshot = run;
  snapshot.network = result.network;
  write_json_file(out / "config.json", to_json(snapshot));
  save_checkpoint(out / "checkpoint.json", result.best_params, checkpoint_meta(result, run.train));
  write_json_file(out / "train_report.json", result.report.to_json(true));
  write_json_file(out / "metrics.json", metrics_json(result, timing));
}

void cmd_train(const TrainFlags& f, TaskKind task) {
  const RunConfig run = resolve_run_config(f, task);
  const TrainResult result = run_training(run, f.verbose);
  write_run_outputs(run, result, run.out, f.timing);
  std::cout << metrics_json(result, f.timing).dump() << '\n';
}

struct Loaded {
  ParamStore params;
  json meta;
  NetworkConfig network;
};

Loaded load_model(const std::string& checkpoint, TaskKind expected) {
  require_file(checkpoint, "checkpoint");
  Loaded m;
  m.params = load_checkpoint(checkpoint, &m.meta);
  if (!m.meta.contains("task") || !m.meta.contains("network")) {
    throw DataError(checkpoint + ": checkpoint metadata lacks task or network");
  }
  if (parse_task_kind(m.meta.at("task").get<std::string>()) != expected) {
    throw ConfigError(checkpoint + ": checkpoint was trained for task " + m.meta.at("task").get<std::string>());
  }
  m.network = network_config_from_json(m.meta.at("network"));
  return m;
}

std::uint64_t meta_seed(const json& meta) { return meta.value("seed", std::uint64_t{0}); }

void cmd_eval_kg(const std::string& data, const std::string& checkpoint, const std::string& out_dir,
                 const std::string& split, bool ranks_flag) {
  require_dir(data, "dataset directory");
  Loaded m = load_model(checkpoint, TaskKind::kg);
  const KgDataset kg = load_kg_dataset(data);
  if (m.network.num_relations != kg.relation_count ||
      m.params.at("entity.embedding").value.rows() != kg.entity_count) {
    throw DataError("checkpoint does not match the dataset's entity or relation count");
  }
  const std::vector<Triple>& triples = split == "valid" ? kg.valid : kg.test;
  if (triples.empty()) throw DataError("dataset has no " + split + " triples");
  const MagnaNetwork net(m.network);
  const std::vector<TripleRank> ranks = evaluate_kg(net, m.params, kg, triples);
  const RankingMetrics r = ranking_metrics(ranks);
  const std::uint64_t seed = meta_seed(m.meta);
  const fs::path out(out_dir);
  write_json_file(out / "config.json",
                  {{"command", "eval-kg"}, {"data", data}, {"checkpoint", checkpoint}, {"split", split},
                   {"seed", seed}, {"network", to_json(m.network)}});
  const json metrics = {{"seed", seed},     {"split", split},       {"mr", r.mr},
                        {"mrr", r.mrr},     {"hits@1", r.hits1},    {"hits@3", r.hits3},
                        {"hits@10", r.hits10}, {"count", r.count}};
  write_json_file(out / "eval_metrics.json", metrics);
  {
    std::ofstream csv(out / "eval_metrics.csv");
    csv << "# seed=" << seed << "\nmetric,value\n";
    for (const char* key : {"mr", "mrr", "hits@1", "hits@3", "hits@10"}) {
      csv << key << ',' << metrics.at(key).dump() << '\n';
    }
    if (!csv) throw DataError("cannot write eval_metrics.csv");
  }
  if (ranks_flag) {
    std::ofstream csv(out / "ranks.csv");
    csv << "# seed=" << seed << "\nhead,relation,tail,tail_rank,head_rank\n";
    auto ename = [&](NodeId id) { return kg.entity_names[static_cast<std::size_t>(id)]; };
    for (std::size_t i = 0; i < triples.size(); ++i) {
      csv << ename(triples[i].head) << ',' << kg.relation_names[static_cast<std::size_t>(triples[i].rel)]
          << ',' << ename(triples[i].tail) << ',' << ranks[i].tail << ',' << ranks[i].head << '\n';
    }
    if (!csv) throw DataError("cannot write ranks.csv");
  }
  std::cout << metrics.dump() << '\n';
}

struct SearchFlags {
  TrainFlags train;
  std::string space;
  int trials = 10;
  int jobs = 1;
  std::string task;  // empty: from the config, else node
};

void cmd_search(const SearchFlags& f) {
  require_file(f.space, "search space");
  const SearchSpace space = load_search_space(f.space);
  TaskKind task = TaskKind::node;
  if (!f.task.empty()) {
    task = parse_task_kind(f.task);
  } else if (!f.train.config.empty()) {
    task = load_run_config(f.train.config).task;
  }
  const RunConfig base = resolve_run_config(f.train, task);

  std::optional<NodeDataset> nodes;
  std::optional<KgDataset> kg;
  if (task == TaskKind::kg) {
    kg = load_kg_dataset(base.data);
  } else {
    nodes = load_node_dataset(base.data);
  }
  const TrialRunner runner = [&](const RunConfig& cfg) {
    const TrainResult r = task == TaskKind::kg ? train_kg(*kg, cfg.network, cfg.train)
                                               : train_node_classifier(*nodes, cfg.network, cfg.train);
    return TrialOutcome{r.report.best_val, r.report.test_metric, r.report.best_epoch};
  };
  const std::uint64_t seed = base.train.seed;
  const std::vector<TrialResult> table = random_search(base, space, f.trials, seed, runner, f.jobs);
  const fs::path out(base.out);
  write_json_file(out / "config.json", to_json(base));
  write_json_file(out / "search.json", {{"seed", seed}, {"space", read_json_file(f.space)},
                                        {"trials", f.trials}, {"jobs", f.jobs}});
  write_trial_table(out / "trials.csv", table, space, seed);
  std::size_t failed = 0;
  for (const TrialResult& t : table) failed += t.error.empty() ? 0 : 1;
  std::cout << "trials " << table.size() << ", failed " << failed;
  if (failed < table.size()) std::cout << ", best val " << table.front().outcome.val_metric;
  std::cout << '\n';
  if (failed == table.size()) throw NumericError("every search trial failed; see trials.csv");
}

struct SpectrumFlags {
  std::string graph;
  std::string data;
  std::string checkpoint;
  double alpha = 0.1;
  int layer = 0;
  int head = 0;
  std::string out;
  std::uint64_t seed = 0;
};

void cmd_spectrum(const SpectrumFlags& f) {
  DiffusionConfig{f.alpha, 1}.validate();
  SpectrumReport report;
  json snapshot = {{"command", "analyze spectrum"}, {"alpha", f.alpha}, {"seed", f.seed}};
  if (!f.graph.empty()) {
    require_file(f.graph, "graph file");
    report = uniform_spectrum_report(with_isolated_self_loops(load_edge_list(f.graph)), f.alpha);
    snapshot["graph"] = f.graph;
  } else {
    require_dir(f.data, "dataset directory");
    Loaded m = load_model(f.checkpoint, TaskKind::node);
    const NodeDataset data = load_node_dataset(f.data);
    const MagnaNetwork net(m.network);
    const std::vector<double> att = node_model_attention(net, m.params, data, f.layer, f.head);
    const Matrix dense = dense_attention(att, prepared_graph(data.graph));
    report = spectrum_report(symmetrized(dense), f.alpha, "symmetrized-learned-attention");
    snapshot.update({{"data", f.data}, {"checkpoint", f.checkpoint}, {"layer", f.layer}, {"head", f.head}});
  }
  const fs::path out(f.out);
  write_json_file(out / "config.json", snapshot);
  write_spectrum_csv(out / "spectrum.csv", report, f.seed);
  json summary = spectrum_summary(report);
  summary["seed"] = f.seed;
  write_json_file(out / "spectrum.json", summary);
  std::cout << summary.dump() << '\n';
}

void cmd_discrepancy(const std::string& data_dir, const std::string& checkpoint, int layer, int head,
                     const std::string& out_dir) {
  require_dir(data_dir, "dataset directory");
  Loaded m = load_model(checkpoint, TaskKind::node);
  const NodeDataset data = load_node_dataset(data_dir);
  const MagnaNetwork net(m.network);
  const std::vector<double> att = node_model_attention(net, m.params, data, layer, head);
  const DiscrepancyReport report = attention_discrepancy(att, prepared_graph(data.graph));
  const std::uint64_t seed = meta_seed(m.meta);
  const fs::path out(out_dir);
  write_json_file(out / "config.json", {{"command", "analyze discrepancy"}, {"data", data_dir},
                                        {"checkpoint", checkpoint}, {"layer", layer}, {"head", head},
                                        {"seed", seed}});
  write_discrepancy_csv(out / "discrepancy.csv", report, seed);
  json summary = discrepancy_summary(report);
  summary.update({{"seed", seed}, {"layer", layer}, {"head", head}});
  write_json_file(out / "discrepancy.json", summary);
  std::cout << json{{"mean", summary.at("mean")}, {"nodes", summary.at("nodes")}}.dump() << '\n';
}

struct Variant {
  std::string name;
  AblationFlags flags;
};

std::vector<Variant> ablation_variants(const std::string& list) {
  AblationFlags all;
  std::vector<Variant> variants{{"full", {}}};
  std::stringstream ss(list);
  std::string flag;
  int count = 0;
  while (std::getline(ss, flag, ',')) {
    if (flag.empty()) continue;
    AblationFlags one;
    if (flag == "no_diffusion") {
      one.no_diffusion = all.no_diffusion = true;
    } else if (flag == "no_layernorm") {
      one.no_layernorm = all.no_layernorm = true;
    } else if (flag == "no_feedforward") {
      one.no_feedforward = all.no_feedforward = true;
    } else {
      throw ConfigError("unknown ablation flag \"" + flag + "\"");
    }
    variants.push_back({flag, one});
    ++count;
  }
  if (count == 0) throw ConfigError("--flags needs at least one ablation flag");
  if (count > 1) {
    variants.push_back({all.gat_equivalent() ? "gat_equivalent" : "combined", all});
  }
  return variants;
}

void cmd_ablate(const TrainFlags& f, const std::string& flags) {
  const std::vector<Variant> variants = ablation_variants(flags);
  TaskKind task = TaskKind::node;
  if (!f.config.empty()) task = load_run_config(f.config).task;
  const RunConfig base = resolve_run_config(f, task);
  const fs::path out(base.out);
  write_json_file(out / "config.json", to_json(base));

  std::ofstream table(out / "ablation.csv");
  table << "# seed=" << base.train.seed << '\n';
  table << "variant,no_diffusion,no_layernorm,no_feedforward,gat_equivalent,best_epoch,val_metric,test_metric\n";
  for (const Variant& v : variants) {
    RunConfig run = base;
    run.network.ablation = v.flags;
    run.out = (out / v.name).string();
    const TrainResult result = run_training(run, f.verbose);
    write_run_outputs(run, result, run.out, f.timing);
    table << v.name << ',' << v.flags.no_diffusion << ',' << v.flags.no_layernorm << ','
          << v.flags.no_feedforward << ',' << v.flags.gat_equivalent() << ',' << result.report.best_epoch
          << ',' << json(result.report.best_val).dump() << ',' << json(result.report.test_metric).dump()
          << '\n';
    std::cout << v.name << (v.flags.gat_equivalent() ? " (GAT-equivalent)" : "") << ": val "
              << result.report.best_val << ", test " << result.report.test_metric << '\n';
  }
  if (!table) throw DataError("cannot write ablation.csv");
}

void add_train_flags(CLI::App* sub, TrainFlags& f, bool config_required) {
  sub->add_option("--data", f.data, "dataset directory");
  auto* cfg = sub->add_option("--config", f.config, "run config JSON");
  if (config_required) cfg->required();
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--seed", f.seed, "random seed (overrides the config)");
  sub->add_flag("--timing", f.timing, "record wall-clock seconds in metrics.json");
  sub->add_flag("-v,--verbose", f.verbose, "print per-epoch progress to stderr");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"magna: multi-hop attention diffusion for graphs"};
  app.require_subcommand(1);

  TrainFlags node_flags;
  auto* train_node = app.add_subcommand("train-node", "train a node classifier");
  add_train_flags(train_node, node_flags, false);

  TrainFlags kg_flags;
  auto* train_kg_cmd = app.add_subcommand("train-kg", "train a KG completion model");
  add_train_flags(train_kg_cmd, kg_flags, false);

  std::string eval_data, eval_checkpoint, eval_out, eval_split = "test";
  bool eval_ranks = false;
  auto* eval_kg = app.add_subcommand("eval-kg", "filtered ranking of a trained KG model");
  eval_kg->add_option("--data", eval_data, "KG directory")->required();
  eval_kg->add_option("--checkpoint", eval_checkpoint, "checkpoint JSON")->required();
  eval_kg->add_option("--out", eval_out, "output directory")->required();
  eval_kg->add_option("--split", eval_split, "valid or test")->check(CLI::IsMember({"valid", "test"}));
  eval_kg->add_flag("--ranks", eval_ranks, "also write per-triple ranks");

  SearchFlags search_flags;
  auto* search = app.add_subcommand("search", "random hyperparameter search");
  add_train_flags(search, search_flags.train, false);
  search->add_option("--space", search_flags.space, "search space JSON")->required();
  search->add_option("--trials", search_flags.trials, "number of trials")->check(CLI::PositiveNumber);
  search->add_option("--jobs", search_flags.jobs, "parallel trial workers")->check(CLI::PositiveNumber);
  search->add_option("--task", search_flags.task, "node or kg")->check(CLI::IsMember({"node", "kg"}));

  auto* analyze = app.add_subcommand("analyze", "spectral and attention analysis");
  analyze->require_subcommand(1);
  SpectrumFlags spectrum_flags;
  auto* spectrum = analyze->add_subcommand("spectrum", "eigenvalues before and after diffusion");
  auto* graph_opt = spectrum->add_option("--graph", spectrum_flags.graph, "undirected edge list (uniform attention)");
  auto* data_opt = spectrum->add_option("--data", spectrum_flags.data, "node dataset (learned attention)");
  spectrum->add_option("--checkpoint", spectrum_flags.checkpoint, "node checkpoint")->needs(data_opt);
  data_opt->excludes(graph_opt);
  spectrum->add_option("--alpha", spectrum_flags.alpha, "teleport probability")->required();
  spectrum->add_option("--layer", spectrum_flags.layer, "block index for learned attention");
  spectrum->add_option("--head", spectrum_flags.head, "head index for learned attention");
  spectrum->add_option("--seed", spectrum_flags.seed, "seed recorded in outputs");
  spectrum->add_option("--out", spectrum_flags.out, "output directory")->required();

  std::string disc_data, disc_checkpoint, disc_out;
  int disc_layer = 0, disc_head = 0;
  auto* discrepancy = analyze->add_subcommand("discrepancy", "attention discrepancy per node");
  discrepancy->add_option("--data", disc_data, "node dataset")->required();
  discrepancy->add_option("--checkpoint", disc_checkpoint, "node checkpoint")->required();
  discrepancy->add_option("--layer", disc_layer, "block index");
  discrepancy->add_option("--head", disc_head, "head index");
  discrepancy->add_option("--out", disc_out, "output directory")->required();

  TrainFlags ablate_flags;
  std::string ablate_list;
  auto* ablate = app.add_subcommand("ablate", "train the full model and ablated variants");
  add_train_flags(ablate, ablate_flags, false);
  ablate->add_option("--flags", ablate_list, "comma list of no_diffusion,no_layernorm,no_feedforward")->required();

  std::string synth_kind, synth_out;
  std::uint64_t synth_seed = 0;
  PlantedPartitionOptions synth_node;
  CompositionalKgOptions synth_kg;
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
  synth->add_option("kind", synth_kind, "node or kg")->required()->check(CLI::IsMember({"node", "kg"}));
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--nodes", synth_node.nodes, "node count");
  synth->add_option("--classes", synth_node.classes, "class count");
  synth->add_option("--features", synth_node.feature_dim, "feature width");
  synth->add_option("--groups", synth_kg.groups, "KG chain count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_node) {
      cmd_train(node_flags, TaskKind::node);
    } else if (*train_kg_cmd) {
      cmd_train(kg_flags, TaskKind::kg);
    } else if (*eval_kg) {
      cmd_eval_kg(eval_data, eval_checkpoint, eval_out, eval_split, eval_ranks);
    } else if (*search) {
      cmd_search(search_flags);
    } else if (*spectrum) {
      if (spectrum_flags.graph.empty() && spectrum_flags.checkpoint.empty()) {
        throw ConfigError("analyze spectrum needs --graph, or --data with --checkpoint");
      }
      cmd_spectrum(spectrum_flags);
    } else if (*discrepancy) {
      cmd_discrepancy(disc_data, disc_checkpoint, disc_layer, disc_head, disc_out);
    } else if (*ablate) {
      cmd_ablate(ablate_flags, ablate_list);
    } else if (*synth) {
      if (synth_kind == "node") {
        synth_node.seed = synth_seed;
        write_node_dataset(planted_partition(synth_node), synth_out);
      } else {
        synth_kg.seed = synth_seed;
        write_kg_dataset(compositional_kg(synth_kg), synth_out);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
