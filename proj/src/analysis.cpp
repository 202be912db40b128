#include "magna/analysis.hpp"

#include "magna/attention.hpp"
#include "magna/linalg.hpp"
#include "magna/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>

namespace magna {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kFlatLaplacian = 1e-10;

void require_symmetric(const Matrix& a, const char* who) {
  if (a.rows() != a.cols()) throw ShapeError(std::string(who) + ": square matrix required");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw NumericError(std::string(who) + ": attention matrix is not symmetric");
  }
}

std::vector<double> undirected_degrees(const Graph& graph) {
  std::vector<double> deg(static_cast<std::size_t>(graph.num_nodes()), 0.0);
  for (NodeId v = 0; v < graph.num_nodes(); ++v) {
    deg[static_cast<std::size_t>(v)] = static_cast<double>(graph.incoming(v).size());
    if (deg[static_cast<std::size_t>(v)] == 0.0) {
      throw DataError("node " + std::to_string(v) + " has no neighbors; add self-loops first");
    }
  }
  return deg;
}

// alpha (I - (1 - alpha) A)^-1 without the row-sum check, so it also applies
// to symmetric similar forms that are not row-stochastic.
Matrix diffusion_operator(const Matrix& a, double alpha) {
  const Eigen::Index n = a.rows();
  return alpha * dense_solve(Matrix::Identity(n, n) - (1.0 - alpha) * a, Matrix::Identity(n, n));
}

std::ofstream open_csv(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw DataError(file.string() + ": cannot write");
  out.precision(17);
  return out;
}

nlohmann::json number_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

}  // namespace

double diffused_eigenvalue(double lambda, double alpha) {
  return alpha / (1.0 - (1.0 - alpha) * lambda);
}

double laplacian_ratio(double lap, double alpha) { return 1.0 / (alpha / (1.0 - alpha) + lap); }

SpectrumReport spectrum_report(const Matrix& attention, double alpha, std::string form) {
  require_symmetric(attention, "spectrum_report");
  DiffusionConfig{alpha, 1}.validate();
  if (alpha >= 1.0) throw ConfigError("spectrum_report: alpha must be < 1");
  const SymEigen base = sym_eigen(attention);
  const SymEigen diffused = sym_eigen(symmetrized(diffusion_operator(attention, alpha)));

  SpectrumReport report;
  report.alpha = alpha;
  report.form = std::move(form);
  const Eigen::Index n = base.values.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    SpectrumRow row;
    row.lambda = base.values(i);
    row.diffused_measured = diffused.values(i);
    row.diffused_predicted = diffused_eigenvalue(row.lambda, alpha);
    row.laplacian = 1.0 - row.lambda;
    row.laplacian_diffused = 1.0 - row.diffused_measured;
    report.max_eigen_deviation =
        std::max(report.max_eigen_deviation, std::abs(row.diffused_measured - row.diffused_predicted));
    if (std::abs(row.laplacian) > kFlatLaplacian) {
      row.ratio_measured = row.laplacian_diffused / row.laplacian;
      row.ratio_predicted = laplacian_ratio(row.laplacian, alpha);
      report.max_ratio_deviation =
          std::max(report.max_ratio_deviation, std::abs(row.ratio_measured - row.ratio_predicted));
    } else {
      row.ratio_measured = kNaN;
      row.ratio_predicted = kNaN;
    }
    report.rows.push_back(row);
  }
  return report;
}

Matrix uniform_attention(const Graph& graph) {
  const Eigen::Index n = graph.num_nodes();
  Matrix a = Matrix::Zero(n, n);
  for (NodeId i = 0; i < graph.num_nodes(); ++i) {
    const EdgeRange r = graph.incoming(i);
    if (r.empty()) throw DataError("uniform_attention: node " + std::to_string(i) + " has no incoming edge");
    const double w = 1.0 / static_cast<double>(r.size());
    for (std::size_t e = r.begin; e < r.end; ++e) a(i, graph.sources()[e]) += w;
  }
  return a;
}

Matrix normalized_adjacency(const Graph& graph) {
  const std::vector<double> deg = undirected_degrees(graph);
  const Eigen::Index n = graph.num_nodes();
  Matrix s = Matrix::Zero(n, n);
  for (const Edge& e : graph.edges()) {
    s(e.dst, e.src) += 1.0 / std::sqrt(deg[static_cast<std::size_t>(e.dst)] * deg[static_cast<std::size_t>(e.src)]);
  }
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw DataError("normalized_adjacency: graph is not undirected");
  }
  return s;
}

Matrix symmetrized(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("symmetrized: square matrix required");
  return 0.5 * (a + a.transpose());
}

SpectrumReport uniform_spectrum_report(const Graph& graph, double alpha) {
  const Matrix a = uniform_attention(graph);
  if ((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12) return spectrum_report(a, alpha, "uniform");
  return spectrum_report(normalized_adjacency(graph), alpha, "normalized-adjacency");
}

double verify_eigenvector_sharing(const Matrix& attention, double alpha) {
  require_symmetric(attention, "verify_eigenvector_sharing");
  DiffusionConfig{alpha, 1}.validate();
  const SymEigen eig = sym_eigen(attention);
  const Matrix diffusion = diffusion_operator(attention, alpha);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
    const Vector v = eig.vectors.col(k);
    const Vector residual = diffusion * v - diffused_eigenvalue(eig.values(k), alpha) * v;
    worst = std::max(worst, residual.cwiseAbs().maxCoeff());
  }
  return worst;
}

double verify_uniform_eigenvector_sharing(const Graph& graph, double alpha) {
  const std::vector<double> deg = undirected_degrees(graph);
  const SymEigen eig = sym_eigen(normalized_adjacency(graph));
  const Matrix diffusion = exact_diffusion_oracle(uniform_attention(graph), alpha);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
    Vector u = eig.vectors.col(k);
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) /= std::sqrt(deg[static_cast<std::size_t>(i)]);
    u /= u.norm();
    const Vector residual = diffusion * u - diffused_eigenvalue(eig.values(k), alpha) * u;
    worst = std::max(worst, residual.cwiseAbs().maxCoeff());
  }
  return worst;
}

DiscrepancyReport attention_discrepancy(std::span<const double> edge_attention, const Graph& graph,
                                        int bins, double histogram_max) {
  if (edge_attention.size() != graph.num_edges()) {
    throw ShapeError("attention_discrepancy: need one attention value per edge");
  }
  if (bins < 1 || !(histogram_max > 0.0)) throw ConfigError("attention_discrepancy: bad histogram");
  DiscrepancyReport report;
  report.histogram_max = histogram_max;
  report.histogram.assign(static_cast<std::size_t>(bins), 0);
  const auto src = graph.sources();
  for (NodeId i = 0; i < graph.num_nodes(); ++i) {
    const EdgeRange r = graph.incoming(i);
    if (r.empty()) throw DataError("attention_discrepancy: node " + std::to_string(i) + " has no neighbors");
    // Group by source so parallel edges from one neighbor count as one entry.
    std::map<NodeId, double> row;
    for (std::size_t e = r.begin; e < r.end; ++e) row[src[e]] += edge_attention[e];
    const double uniform = 1.0 / static_cast<double>(row.size());
    double sq = 0.0;
    for (const auto& [j, w] : row) sq += (w - uniform) * (w - uniform);
    const double delta = std::sqrt(sq) / static_cast<double>(row.size());
    report.delta.push_back(delta);
    report.degree.push_back(row.size());
    report.mean += delta;
    auto bin = static_cast<std::size_t>(delta / histogram_max * bins);
    report.histogram[std::min(bin, report.histogram.size() - 1)] += 1;
  }
  if (!report.delta.empty()) report.mean /= static_cast<double>(report.delta.size());
  return report;
}

std::vector<double> node_model_attention(const MagnaNetwork& net, ParamStore& params,
                                         const NodeDataset& data, int layer, int head) {
  const NetworkConfig& c = net.config();
  if (layer < 0 || layer >= c.blocks) {
    throw ConfigError("layer " + std::to_string(layer) + " out of range [0, " + std::to_string(c.blocks) + ")");
  }
  if (head < 0 || head >= c.heads) {
    throw ConfigError("head " + std::to_string(head) + " out of range [0, " + std::to_string(c.heads) + ")");
  }
  const Graph graph = prepared_graph(data.graph);
  ad::Tape tape(false);
  ad::Rng unused(0);
  std::vector<BlockAttention> attention;
  net.forward(tape, params, tape.constant(data.features), graph, false, unused, &attention);
  const Matrix& a = attention[static_cast<std::size_t>(layer)].heads[static_cast<std::size_t>(head)].value();
  return {a.data(), a.data() + a.size()};
}

void write_spectrum_csv(const std::filesystem::path& file, const SpectrumReport& report,
                        std::uint64_t seed) {
  std::ofstream out = open_csv(file);
  out << "# seed=" << seed << '\n';
  out << "# alpha=" << report.alpha << '\n';
  out << "# form=" << report.form << '\n';
  out << "index,lambda,lambda_diffused,lambda_diffused_predicted,laplacian,laplacian_diffused,"
         "ratio,ratio_predicted\n";
  auto field = [](double x) { return std::isfinite(x) ? nlohmann::json(x).dump() : std::string(); };
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const SpectrumRow& r = report.rows[i];
    out << i << ',' << field(r.lambda) << ',' << field(r.diffused_measured) << ','
        << field(r.diffused_predicted) << ',' << field(r.laplacian) << ',' << field(r.laplacian_diffused)
        << ',' << field(r.ratio_measured) << ',' << field(r.ratio_predicted) << '\n';
  }
  if (!out) throw DataError(file.string() + ": write failed");
}

nlohmann::json spectrum_summary(const SpectrumReport& report) {
  return {{"alpha", report.alpha},
          {"form", report.form},
          {"size", report.rows.size()},
          {"max_eigen_deviation", report.max_eigen_deviation},
          {"max_ratio_deviation", report.max_ratio_deviation}};
}

void write_discrepancy_csv(const std::filesystem::path& file, const DiscrepancyReport& report,
                           std::uint64_t seed) {
  std::ofstream out = open_csv(file);
  out << "# seed=" << seed << '\n';
  out << "node,degree,delta\n";
  for (std::size_t i = 0; i < report.delta.size(); ++i) {
    out << i << ',' << report.degree[i] << ',' << nlohmann::json(report.delta[i]).dump() << '\n';
  }
  if (!out) throw DataError(file.string() + ": write failed");
}

nlohmann::json discrepancy_summary(const DiscrepancyReport& report) {
  nlohmann::json bins = nlohmann::json::array();
  const double width = report.histogram_max / static_cast<double>(report.histogram.size());
  for (std::size_t b = 0; b < report.histogram.size(); ++b) {
    bins.push_back({{"low", width * static_cast<double>(b)},
                    {"high", width * static_cast<double>(b + 1)},
                    {"count", report.histogram[b]}});
  }
  return {{"nodes", report.delta.size()}, {"mean", number_or_null(report.mean)}, {"histogram", std::move(bins)}};
}

}  // namespace magna
