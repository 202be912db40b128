#pragma once

#include "magna/graph.hpp"
#include "magna/network.hpp"

#include "json.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace magna {

// alpha / (1 - (1 - alpha) * lambda): eigenvalue of the diffusion operator
// paired with eigenvalue lambda of the attention matrix.
double diffused_eigenvalue(double lambda, double alpha);
// 1 / (alpha / (1 - alpha) + lap): Laplacian eigenvalue ratio after / before diffusion.
double laplacian_ratio(double lap, double alpha);

struct SpectrumRow {
  double lambda = 0.0;
  double diffused_measured = 0.0;
  double diffused_predicted = 0.0;
  double laplacian = 0.0;           // 1 - lambda
  double laplacian_diffused = 0.0;  // 1 - diffused_measured
  double ratio_measured = 0.0;      // NaN when laplacian is ~0
  double ratio_predicted = 0.0;     // NaN when laplacian is ~0
};

struct SpectrumReport {
  double alpha = 0.0;
  std::string form;  // how the symmetric input was obtained
  std::vector<SpectrumRow> rows;  // ascending lambda
  double max_eigen_deviation = 0.0;
  double max_ratio_deviation = 0.0;
};

// Eigenvalues of a symmetric attention matrix and of its exact diffusion,
// measured against the closed-form map. Throws NumericError on asymmetric input.
SpectrumReport spectrum_report(const Matrix& attention, double alpha, std::string form = "symmetric");

// Row-normalized adjacency: row i is uniform over the sources of i's incoming edges.
Matrix uniform_attention(const Graph& graph);
// D^-1/2 W D^-1/2 for the 0/1 adjacency W of an undirected graph. Symmetric and
// similar to uniform_attention, so both share one spectrum.
Matrix normalized_adjacency(const Graph& graph);
// (A + A^T) / 2
Matrix symmetrized(const Matrix& a);

// Symmetric attention input for spectrum_report: uniform attention when it is
// already symmetric (regular graphs), otherwise the normalized adjacency.
SpectrumReport uniform_spectrum_report(const Graph& graph, double alpha);

// max over eigenpairs (lambda, v) of A of |diffusion * v - map(lambda) * v|_inf.
double verify_eigenvector_sharing(const Matrix& attention, double alpha);
// Same check on the non-symmetric uniform attention of an undirected graph,
// using eigenvectors D^-1/2 v of its symmetric similar form.
double verify_uniform_eigenvector_sharing(const Graph& graph, double alpha);

struct DiscrepancyReport {
  std::vector<double> delta;  // per node
  std::vector<std::size_t> degree;
  double mean = 0.0;
  double histogram_max = 0.5;
  std::vector<std::size_t> histogram;  // equal bins over [0, histogram_max]; overflow in the last
};

// Delta_i = |A[i,:] - U_i|_2 / degree(i), U_i uniform over i's incoming edges.
DiscrepancyReport attention_discrepancy(std::span<const double> edge_attention, const Graph& graph,
                                        int bins = 20, double histogram_max = 0.5);

// Evaluation-mode edge attention of one head in one block, aligned with the
// prepared graph's edges.
std::vector<double> node_model_attention(const MagnaNetwork& net, ParamStore& params,
                                         const NodeDataset& data, int layer, int head);

void write_spectrum_csv(const std::filesystem::path& file, const SpectrumReport& report,
                        std::uint64_t seed);
nlohmann::json spectrum_summary(const SpectrumReport& report);
void write_discrepancy_csv(const std::filesystem::path& file, const DiscrepancyReport& report,
                           std::uint64_t seed);
nlohmann::json discrepancy_summary(const DiscrepancyReport& report);

}  // namespace magna
