// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion of the selected group fails.
//
//   acceptance --group core   criteria 1-4, the toy parts of 8, and 10
//   acceptance --group data   criteria 5-7, 9 and the WN18RR part of 8;
//                             reads MAGNA_CORA_DIR and MAGNA_WN18RR_DIR

#include "magna/analysis.hpp"
#include "magna/attention.hpp"
#include "magna/config.hpp"
#include "magna/synthetic.hpp"
#include "magna/trainer.hpp"
#include "support/oracles.hpp"
#include "support/scratch.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;
using namespace magna;
namespace oracle = magna::oracle;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << x;
  return s.str();
}

int failures = 0;

void run_criterion(const std::string& id, const std::string& name, double time_limit,
                   const std::function<Verdict()>& check) {
  Timer t;
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double s = t.seconds();
  if (time_limit > 0 && s > time_limit) {
    v.pass = false;
    v.detail += "; runtime " + fmt(s) + " s exceeds " + fmt(time_limit) + " s";
  }
  if (!v.pass) ++failures;
  std::cout << (v.pass ? "PASS " : "FAIL ") << id << ' ' << name << ": " << v.detail << " [" << fmt(s, 3)
            << " s]" << std::endl;
}

fs::path source_path(const std::string& relative) { return fs::path(MAGNA_SOURCE_DIR) / relative; }

fs::path data_dir(const char* env, const char* fallback) {
  if (const char* v = std::getenv(env); v && *v) return v;
  return source_path(fallback);
}

std::vector<double> column(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

double mean(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::string list(const std::vector<double>& xs) {
  std::string s = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + fmt(xs[i]);
  return s + "]";
}

Graph undirected(int n, const std::vector<std::pair<int, int>>& pairs) {
  std::set<std::pair<int, int>> seen;
  std::vector<Edge> edges;
  for (auto [a, b] : pairs) {
    if (a == b || !seen.insert({std::min(a, b), std::max(a, b)}).second) continue;
    edges.push_back({a, 0, b});
    edges.push_back({b, 0, a});
  }
  return Graph::build(n, 1, std::move(edges), false);
}

// ---------------------------------------------------------------- criterion 1

Verdict diffusion_convergence() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(2, 50);
  std::uniform_real_distribution<double> density(0.05, 0.4);
  double worst_slack = -1e300;
  int bound_violations = 0;
  int monotone_violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = size(rng);
    const Graph g = oracle::random_graph(n, density(rng), rng);
    ad::Tape tape(false);
    const Matrix att =
        attention_weights(tape.constant(oracle::random_matrix(static_cast<Eigen::Index>(g.num_edges()), 1, rng, 2.0)),
                          g)
            .value();
    const Matrix dense = dense_attention(column(att), g);
    const Matrix h = oracle::random_matrix(n, 4, rng);
    const double h_inf = h.cwiseAbs().maxCoeff();
    for (double alpha : {0.1, 0.25, 0.5}) {
      const Matrix exact = exact_diffusion_oracle(dense, alpha) * h;
      double previous = std::numeric_limits<double>::infinity();
      for (int k = 1; k <= 12; ++k) {
        const Matrix z = attention_diffusion(tape.constant(att), tape.constant(h), {alpha, k}, g).value();
        const double err = (z - exact).cwiseAbs().maxCoeff();
        const double bound = 2.0 * std::pow(1.0 - alpha, k) * h_inf;
        worst_slack = std::max(worst_slack, err / bound);
        if (err > bound) ++bound_violations;
        // Rounding slack of a few ulps of |H|_inf.
        if (err > previous + 1e-15 * h_inf) ++monotone_violations;
        previous = err;
      }
    }
  }
  return {bound_violations == 0 && monotone_violations == 0,
          "100 graphs x 3 alphas x K=1..12; bound violations " + std::to_string(bound_violations) +
              ", monotonicity violations " + std::to_string(monotone_violations) + ", max err/bound " +
              fmt(worst_slack)};
}

// ---------------------------------------------------------------- criterion 2

Verdict ppr_equivalence() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> size(2, 50);
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const Graph g = oracle::random_graph(size(rng), 0.2, rng);
    const std::vector<double> scores =
        column(oracle::random_matrix(static_cast<Eigen::Index>(g.num_edges()), 1, rng, 2.0));
    const Matrix a = oracle::dense_softmax_attention(g, scores);
    for (double alpha : {0.1, 0.2, 0.5, 0.9}) {
      worst = std::max(worst, (exact_diffusion_oracle(a, alpha) - oracle::ppr_series(a, alpha, 200))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
  }
  return {worst <= 1e-8, "40 graphs x alpha {0.1, 0.2, 0.5, 0.9}; max |solve - series| " + fmt(worst)};
}

// ---------------------------------------------------------------- criterion 3

Verdict spectral_map() {
  std::vector<std::pair<std::string, Graph>> graphs;
  for (int n : {3, 4, 5, 8, 13, 21, 34, 55, 100}) {
    std::vector<std::pair<int, int>> p;
    for (int i = 0; i < n; ++i) p.emplace_back(i, (i + 1) % n);
    graphs.emplace_back("cycle" + std::to_string(n), undirected(n, p));
  }
  for (int n : {2, 5, 12, 30}) {
    std::vector<std::pair<int, int>> p;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) p.emplace_back(i, j);
    }
    graphs.emplace_back("complete" + std::to_string(n), undirected(n, p));
  }
  for (int dim = 1; dim <= 6; ++dim) {
    const int n = 1 << dim;
    std::vector<std::pair<int, int>> p;
    for (int i = 0; i < n; ++i) {
      for (int b = 0; b < dim; ++b) p.emplace_back(i, i ^ (1 << b));
    }
    graphs.emplace_back("hypercube" + std::to_string(dim), undirected(n, p));
  }
  std::mt19937_64 rng(303);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 20 + 16 * trial;
    std::uniform_int_distribution<int> offset(1, n / 2 - 1);
    std::set<int> offsets{1};
    while (offsets.size() < 3) offsets.insert(offset(rng));
    std::vector<std::pair<int, int>> p;
    for (int i = 0; i < n; ++i) {
      for (int o : offsets) p.emplace_back(i, (i + o) % n);
    }
    graphs.emplace_back("circulant" + std::to_string(n), undirected(n, p));
  }

  double eigen_dev = 0.0;
  double ratio_dev = 0.0;
  int non_uniform = 0;
  int order_violations = 0;
  for (const auto& [name, g] : graphs) {
    for (double alpha : {0.05, 0.1, 0.3, 0.5}) {
      const SpectrumReport r = uniform_spectrum_report(g, alpha);
      if (r.form != "uniform") ++non_uniform;
      eigen_dev = std::max(eigen_dev, r.max_eigen_deviation);
      ratio_dev = std::max(ratio_dev, r.max_ratio_deviation);
      // Rows ascend in lambda, so the Laplacian eigenvalue descends and the ratio must ascend.
      for (std::size_t i = 1; i < r.rows.size(); ++i) {
        const SpectrumRow& lo = r.rows[i - 1];
        const SpectrumRow& hi = r.rows[i];
        if (!std::isfinite(hi.ratio_measured) || lo.laplacian - hi.laplacian <= 1e-9) continue;
        if (!(lo.ratio_measured < hi.ratio_measured)) ++order_violations;
        if (!(lo.diffused_measured < hi.diffused_measured)) ++order_violations;
      }
    }
  }

  const Graph path = undirected(3, {{0, 1}, {1, 2}});
  const SpectrumReport p = uniform_spectrum_report(path, 0.5);
  const double expected[] = {1.0 / 3.0, 0.5, 1.0};
  double path_dev = 0.0;
  for (std::size_t i = 0; i < 3; ++i) path_dev = std::max(path_dev, std::abs(p.rows[i].diffused_measured - expected[i]));

  const bool pass = eigen_dev <= 1e-8 && ratio_dev <= 1e-8 && order_violations == 0 && non_uniform == 0 &&
                    path_dev <= 1e-10;
  return {pass, std::to_string(graphs.size()) + " regular graphs <= 100 nodes x 4 alphas; max eigen dev " +
                    fmt(eigen_dev) + ", max ratio dev " + fmt(ratio_dev) + ", order violations " +
                    std::to_string(order_violations) + ", non-symmetric inputs " + std::to_string(non_uniform) +
                    "; path {1/3, 1/2, 1} dev " + fmt(path_dev)};
}

// ---------------------------------------------------------------- criterion 4

Matrix away_from_zero(Matrix m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (std::abs(m.data()[i]) < 0.05) m.data()[i] = m.data()[i] < 0 ? -0.3 : 0.3;
  }
  return m;
}

double network_gradient_error() {
  std::mt19937_64 rng(404);
  const Graph g = oracle::random_graph(10, 0.3, rng, false, 2);
  NetworkConfig c;
  c.blocks = 2;
  c.dim = 4;
  c.heads = 2;
  c.relation_dim = 3;
  c.input_dim = 3;
  c.num_relations = 2;
  c.diffusion = {0.2, 4};
  const MagnaNetwork net(c);
  ParamStore params;
  ad::Rng init(404);
  net.init_params(params, init);
  for (auto& [name, p] : params) p.value += oracle::random_matrix(p.value.rows(), p.value.cols(), rng, 0.1);
  const Matrix x = oracle::random_matrix(10, 3, rng);
  const Matrix projection = oracle::random_matrix(10, 4, rng);
  auto loss = [&](bool backward) {
    ad::Tape tape;
    ad::Rng unused(0);
    const ad::Var out = net.forward(tape, params, tape.constant(x), g, false, unused);
    const ad::Var l = ad::sum(ad::hadamard(out, tape.constant(projection)));
    if (backward) {
      params.zero_grad();
      tape.backward(l);
    }
    return l.value()(0, 0);
  };
  loss(true);
  std::map<std::string, Matrix> analytic;
  for (const auto& [name, p] : params) analytic[name] = p.grad;
  double worst = 0.0;
  for (auto& [name, p] : params) {
    Matrix numeric(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double saved = p.value.data()[i];
      p.value.data()[i] = saved + 1e-5;
      const double up = loss(false);
      p.value.data()[i] = saved - 1e-5;
      const double down = loss(false);
      p.value.data()[i] = saved;
      numeric.data()[i] = (up - down) / 2e-5;
    }
    const Matrix& a = analytic[name];
    worst = std::max(worst, (a - numeric).norm() / std::max({a.norm(), numeric.norm(), 1e-8}));
  }
  return worst;
}

Verdict gradient_integrity() {
  std::mt19937_64 rng(405);
  auto R = [&](Eigen::Index r, Eigen::Index c) { return oracle::random_matrix(r, c, rng); };
  using V = std::vector<ad::Var>;
  const Graph g = oracle::random_graph(6, 0.4, rng, false, 2);
  const auto edges = static_cast<Eigen::Index>(g.num_edges());
  const std::vector<std::int32_t> idx{2, 0, 2, 3};
  const std::vector<std::int32_t> scatter_idx{4, 1, 1, 0};
  const std::vector<std::int32_t> labels{0, 2, 1, 1, 0, 2};
  const std::vector<NodeId> mask{0, 2, 3, 5};
  const std::vector<std::vector<NodeId>> tails{{1}, {0, 3}, {2}};
  struct Case {
    std::string name;
    oracle::Builder build;
    std::vector<Matrix> inputs;
  };
  const std::vector<Case> cases = {
      {"matmul", [](ad::Tape&, const V& v) { return ad::matmul(v[0], v[1]); }, {R(3, 4), R(4, 2)}},
      {"matmul_nt", [](ad::Tape&, const V& v) { return ad::matmul_nt(v[0], v[1]); }, {R(3, 4), R(5, 4)}},
      {"add", [](ad::Tape&, const V& v) { return ad::add(v[0], v[1]); }, {R(3, 2), R(3, 2)}},
      {"add_bias", [](ad::Tape&, const V& v) { return ad::add_bias(v[0], v[1]); }, {R(3, 2), R(1, 2)}},
      {"lincomb", [](ad::Tape&, const V& v) { return ad::lincomb(0.3, v[0], -2.0, v[1]); }, {R(2, 2), R(2, 2)}},
      {"scale", [](ad::Tape&, const V& v) { return ad::scale(v[0], 1.7); }, {R(2, 3)}},
      {"hadamard", [](ad::Tape&, const V& v) { return ad::hadamard(v[0], v[1]); }, {R(2, 3), R(2, 3)}},
      {"concat_cols", [](ad::Tape&, const V& v) { return ad::concat_cols(v); }, {R(3, 1), R(3, 2), R(3, 3)}},
      {"slice_cols", [](ad::Tape&, const V& v) { return ad::slice_cols(v[0], 1, 2); }, {R(3, 4)}},
      {"sum", [](ad::Tape&, const V& v) { return ad::sum(v[0]); }, {R(3, 4)}},
      {"leaky_relu", [](ad::Tape&, const V& v) { return ad::leaky_relu(v[0]); }, {away_from_zero(R(3, 4))}},
      {"tanh", [](ad::Tape&, const V& v) { return ad::tanh(v[0]); }, {R(3, 4)}},
      {"relu", [](ad::Tape&, const V& v) { return ad::relu(v[0]); }, {away_from_zero(R(3, 4))}},
      {"elu", [](ad::Tape&, const V& v) { return ad::elu(v[0]); }, {away_from_zero(R(3, 4))}},
      {"dropout",
       [](ad::Tape&, const V& v) {
         ad::Rng mask_rng(9);
         return ad::dropout(v[0], 0.4, true, mask_rng);
       },
       {R(4, 3)}},
      {"layer_norm", [](ad::Tape&, const V& v) { return ad::layer_norm(v[0], v[1], v[2]); },
       {R(4, 5), R(1, 5), R(1, 5)}},
      {"gather_rows", [&](ad::Tape&, const V& v) { return ad::gather_rows(v[0], idx); }, {R(4, 3)}},
      {"scatter_add_rows", [&](ad::Tape&, const V& v) { return ad::scatter_add_rows(v[0], scatter_idx, 5); },
       {R(4, 3)}},
      {"segment_softmax", [&](ad::Tape&, const V& v) { return ad::segment_softmax(v[0], g.offsets()); },
       {R(edges, 1)}},
      {"edge_spmm", [&](ad::Tape&, const V& v) { return ad::edge_spmm(v[0], v[1], g); }, {R(edges, 1), R(6, 3)}},
      {"edge_scores",
       [&](ad::Tape&, const V& v) { return edge_scores(v[0], g, {v[2], v[3], v[4], v[5]}, v[1]); },
       {R(6, 3), R(2, 2), R(3, 3), R(3, 3), R(2, 3), R(1, 9)}},
      {"attention_diffusion",
       [&](ad::Tape&, const V& v) {
         return attention_diffusion(ad::segment_softmax(v[0], g.offsets()), v[1], {0.15, 5}, g);
       },
       {R(edges, 1), R(6, 3)}},
      {"cross_entropy", [&](ad::Tape&, const V& v) { return cross_entropy_loss(v[0], labels, mask).loss; },
       {R(6, 3)}},
      {"kl_label_smoothing", [&](ad::Tape&, const V& v) { return kl_label_smoothing_loss(v[0], tails, 0.1); },
       {R(3, 5)}},
  };
  double worst = 0.0;
  std::string worst_name;
  std::string failed;
  for (const Case& c : cases) {
    const double err = oracle::check_gradients(c.build, c.inputs).max_relative_error;
    if (err > worst) {
      worst = err;
      worst_name = c.name;
    }
    if (!(err <= 1e-4)) failed += " " + c.name;
  }
  const double net_err = network_gradient_error();
  if (!(net_err <= 1e-4)) failed += " network";
  return {failed.empty(), std::to_string(cases.size()) + " ops, max rel err " + fmt(worst) + " (" + worst_name +
                              "); 2-block network on 10 nodes rel err " + fmt(net_err) +
                              (failed.empty() ? "" : "; failing:" + failed)};
}

// ---------------------------------------------------------------- criterion 8 (toy)

int brute_force_mismatches(const KgDataset& kg, const std::vector<Triple>& all, const QueryScorer& scorer) {
  const std::vector<TripleRank> ranks = filtered_ranks(kg, kg.test, scorer, 5);
  int mismatches = 0;
  const RelationId R = kg.original_relation_count;
  for (std::size_t i = 0; i < kg.test.size(); ++i) {
    const Triple& t = kg.test[i];
    std::set<int> tails, heads;
    for (const Triple& u : all) {
      if (u.head == t.head && u.rel == t.rel) tails.insert(u.tail);
      if (u.tail == t.tail && u.rel == t.rel) heads.insert(u.head);
    }
    const std::array<Query, 2> qs{Query{t.head, t.rel}, Query{t.tail, t.rel + R}};
    const Matrix s = scorer(qs);
    const Eigen::RowVectorXd tail_row = s.row(0);
    const Eigen::RowVectorXd head_row = s.row(1);
    const double tail_rank =
        oracle::brute_force_rank({tail_row.data(), tail_row.data() + tail_row.size()}, t.tail, tails);
    const double head_rank =
        oracle::brute_force_rank({head_row.data(), head_row.data() + head_row.size()}, t.head, heads);
    if (tail_rank != ranks[i].tail) ++mismatches;
    if (head_rank != ranks[i].head) ++mismatches;
  }
  return mismatches;
}

Verdict kg_toy() {
  // Random toy KGs with coarse scores so ties occur.
  std::mt19937_64 rng(808);
  int mismatches = 0;
  int checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int entities = 4 + 5 * trial;
    std::uniform_int_distribution<int> ent(0, entities - 1);
    std::uniform_int_distribution<int> rel(0, 1);
    std::set<Triple> seen;
    std::vector<Triple> all;
    const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(entities * entities), 3 * entities);
    while (all.size() < want) {
      const Triple t{ent(rng), rel(rng), ent(rng)};
      if (seen.insert(t).second) all.push_back(t);
    }
    const std::size_t cut = all.size() * 2 / 3;
    const KgDataset kg = make_kg_dataset(entities, 2, {all.begin(), all.begin() + static_cast<long>(cut)}, {},
                                         {all.begin() + static_cast<long>(cut), all.end()});
    std::uniform_int_distribution<int> coarse(0, 3);
    Matrix table(static_cast<Eigen::Index>(entities) * 4, entities);
    for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = coarse(rng);
    const QueryScorer scorer = [&](std::span<const Query> qs) {
      Matrix out(static_cast<Eigen::Index>(qs.size()), entities);
      for (std::size_t i = 0; i < qs.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = table.row(qs[i].first * 4 + qs[i].second);
      return out;
    };
    mismatches += brute_force_mismatches(kg, all, scorer);
    checked += 2 * static_cast<int>(kg.test.size());
  }

  // Trained model on the compositional KG.
  RunConfig run = load_run_config(source_path("configs/compositional_kg.json"));
  const KgDataset comp = compositional_kg({});
  std::vector<double> mrr;
  for (std::uint64_t seed : {0, 1, 2}) {
    run.train.seed = seed;
    TrainResult r = train_kg(comp, run.network, run.train);
    mrr.push_back(r.report.best_val);
    if (seed == 0) {
      const MagnaNetwork net(r.network);
      const QueryScorer scorer = distmult_scorer(kg_entity_representations(net, r.best_params, comp),
                                                 r.best_params.at("decoder.relation").value);
      std::vector<Triple> all = comp.train;
      all.insert(all.end(), comp.valid.begin(), comp.valid.end());
      all.insert(all.end(), comp.test.begin(), comp.test.end());
      mismatches += brute_force_mismatches(comp, all, scorer);
      checked += 2 * static_cast<int>(comp.test.size());
    }
  }
  const double m = mean(mrr);
  return {mismatches == 0 && m > 0.9,
          std::to_string(checked) + " filtered ranks vs brute force, mismatches " + std::to_string(mismatches) +
              "; compositional KG (" + std::to_string(comp.entity_count) + " entities) validation MRR seeds 0-2 " +
              list(mrr) + ", mean " + fmt(m)};
}

// ---------------------------------------------------------------- criterion 10

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + MAGNA_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Verdict determinism() {
  magna::testing::ScratchDir dir("acceptance_determinism");
  const std::string q = "\"";
  auto path = [&](const std::string& leaf) { return q + (dir / leaf).string() + q; };
  if (cli("synth node --nodes 120 --classes 3 --features 8 --seed 5 --out " + path("node")) != 0 ||
      cli("synth kg --seed 5 --out " + path("kg")) != 0) {
    return {false, "could not write synthetic datasets"};
  }
  dir.write("node.json", R"({"network": {"blocks": 2, "dim": 16, "heads": 4, "hops": 4,
      "attention_dropout": 0.3, "feature_dropout": 0.3}, "train": {"learning_rate": 0.005, "max_epochs": 60}})");
  const std::string kg_cfg = q + source_path("configs/compositional_kg.json").string() + q;
  std::string detail;
  bool pass = true;
  for (const std::string& task : {std::string("node"), std::string("kg")}) {
    const std::string cmd = task == "node" ? "train-node --config " + path("node.json") : "train-kg --config " + kg_cfg;
    for (const char* run : {"a", "b"}) {
      if (cli(cmd + " --seed 7 --data " + path(task) + " --out " + path(task + "_" + run)) != 0) {
        return {false, task + " run failed"};
      }
    }
    const std::string a = magna::testing::read_text(dir / (task + "_a") / "metrics.json");
    const std::string b = magna::testing::read_text(dir / (task + "_b") / "metrics.json");
    const bool same = !a.empty() && a == b;
    pass = pass && same;
    detail += (detail.empty() ? "" : "; ") + task + " metrics.json " + (same ? "identical" : "differ") + " (" +
              std::to_string(a.size()) + " bytes)";
  }
  return {pass, detail};
}

// ---------------------------------------------------------------- data group

struct CoraRuns {
  bool available = false;
  std::string problem;
  NodeDataset data;
  std::vector<double> full_test, one_hop_test, no_diffusion_test;
  std::vector<double> full_seconds;
  std::vector<double> full_delta, gat_delta;
};

std::string cora_shape(const NodeDataset& d) {
  return std::to_string(d.graph.num_nodes()) + " nodes, " + std::to_string(d.features.cols()) + " features, " +
         std::to_string(d.num_classes) + " classes, splits " + std::to_string(d.nodes_in(Split::train).size()) + "/" +
         std::to_string(d.nodes_in(Split::val).size()) + "/" + std::to_string(d.nodes_in(Split::test).size());
}

CoraRuns run_cora() {
  CoraRuns runs;
  const fs::path dir = data_dir("MAGNA_CORA_DIR", "data/cora");
  if (!fs::is_directory(dir)) {
    runs.problem = "dataset not available at " + dir.string();
    return runs;
  }
  runs.data = load_node_dataset(dir);
  const NodeDataset& d = runs.data;
  if (d.graph.num_nodes() != 2708 || d.features.cols() != 1433 || d.num_classes != 7 ||
      d.nodes_in(Split::train).size() != 140 || d.nodes_in(Split::val).size() != 500 ||
      d.nodes_in(Split::test).size() != 1000) {
    runs.problem = "unexpected Cora shape: " + cora_shape(d);
    return runs;
  }
  runs.available = true;
  const RunConfig base = load_run_config(source_path("configs/cora.json"));
  auto train = [&](const std::string& label, std::uint64_t seed, auto mutate) {
    RunConfig run = base;
    run.train.seed = seed;
    mutate(run.network);
    std::cerr << "cora " << label << " seed " << seed << "..." << std::flush;
    TrainResult r = train_node_classifier(d, run.network, run.train);
    std::cerr << " test " << r.report.test_metric << " (" << r.report.wall_seconds << " s)\n";
    return r;
  };
  for (std::uint64_t seed : {0, 1, 2}) {
    TrainResult full = train("K=6", seed, [](NetworkConfig&) {});
    runs.full_test.push_back(full.report.test_metric);
    runs.full_seconds.push_back(full.report.wall_seconds);
    runs.full_delta.push_back(
        attention_discrepancy(node_model_attention(MagnaNetwork(full.network), full.best_params, d, 0, 0),
                              prepared_graph(d.graph))
            .mean);
    runs.one_hop_test.push_back(train("K=1", seed, [](NetworkConfig& n) { n.diffusion.hops = 1; }).report.test_metric);
    runs.no_diffusion_test.push_back(
        train("no_diffusion", seed, [](NetworkConfig& n) { n.ablation.no_diffusion = true; }).report.test_metric);
    TrainResult gat = train("gat_equivalent", seed, [](NetworkConfig& n) { n.ablation = {true, true, true}; });
    runs.gat_delta.push_back(
        attention_discrepancy(node_model_attention(MagnaNetwork(gat.network), gat.best_params, d, 0, 0),
                              prepared_graph(d.graph))
            .mean);
  }
  return runs;
}

Verdict wn18rr_sizes() {
  const fs::path dir = data_dir("MAGNA_WN18RR_DIR", "data/wn18rr");
  if (!fs::is_directory(dir)) return {false, "dataset not available at " + dir.string()};
  const KgDataset kg = load_kg_dataset(dir);
  const bool pass = kg.entity_count == 40943 && kg.original_relation_count == 11 && kg.relation_count == 22 &&
                    kg.train.size() == 86835;
  return {pass, std::to_string(kg.entity_count) + " entities, " + std::to_string(kg.original_relation_count) +
                    " relations (" + std::to_string(kg.relation_count) + " with reverses), " +
                    std::to_string(kg.train.size()) + " train triples"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance checks");
  std::string group = "core";
  app.add_option("--group", group, "core or data")->check(CLI::IsMember({"core", "data"}));
  CLI11_PARSE(app, argc, argv);

  if (group == "core") {
    run_criterion("1", "diffusion-convergence", 10, diffusion_convergence);
    run_criterion("2", "ppr-equivalence", 10, ppr_equivalence);
    run_criterion("3", "spectral-map", 30, spectral_map);
    run_criterion("4", "gradient-integrity", 60, gradient_integrity);
    run_criterion("8a", "kg-ranking-and-compositional-toy", 0, kg_toy);
    run_criterion("10", "determinism", 0, determinism);
  } else {
    CoraRuns cora;
    try {
      cora = run_cora();
    } catch (const std::exception& e) {
      cora.problem = std::string("Cora runs failed: ") + e.what();
    }
    auto needs_cora = [&](const std::function<Verdict()>& check) {
      return [&, check]() -> Verdict {
        if (!cora.available) return {false, cora.problem};
        return check();
      };
    };
    run_criterion("5", "cora-accuracy", 0, needs_cora([&]() -> Verdict {
      const double m = mean(cora.full_test);
      const double slowest = *std::max_element(cora.full_seconds.begin(), cora.full_seconds.end());
      return {m >= 0.80 && slowest <= 1800.0, "test accuracy seeds 0-2 " + list(cora.full_test) + ", mean " +
                                                  fmt(m) + ", slowest run " + fmt(slowest) + " s"};
    }));
    run_criterion("6", "multi-hop-benefit", 0, needs_cora([&]() -> Verdict {
      const double gain = 100.0 * (mean(cora.full_test) - mean(cora.one_hop_test));
      return {gain >= 1.0, "K=6 mean " + fmt(mean(cora.full_test)) + " vs K=1 mean " + fmt(mean(cora.one_hop_test)) +
                               ", gain " + fmt(gain) + " points"};
    }));
    run_criterion("7", "ablation-direction", 0, needs_cora([&]() -> Verdict {
      const double full = mean(cora.full_test);
      const double ablated = mean(cora.no_diffusion_test);
      return {ablated < full, "no-diffusion mean " + fmt(ablated) + " vs full mean " + fmt(full)};
    }));
    run_criterion("8b", "wn18rr-loader-sizes", 0, wn18rr_sizes);
    run_criterion("9", "attention-discrepancy", 0, needs_cora([&]() -> Verdict {
      const double magna = mean(cora.full_delta);
      const double gat = mean(cora.gat_delta);
      return {magna > gat, "mean delta full " + list(cora.full_delta) + " vs GAT-equivalent " +
                               list(cora.gat_delta) + " (means " + fmt(magna) + " vs " + fmt(gat) + ")"};
    }));
  }
  return failures == 0 ? 0 : 1;
}
