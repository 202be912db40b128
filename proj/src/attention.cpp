#include "magna/attention.hpp"

#include "magna/linalg.hpp"

#include <cmath>
#include <string>

namespace magna {

void DiffusionConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ConfigError("diffusion: alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
  if (hops < 1) throw ConfigError("diffusion: hop count must be >= 1");
}

double DiffusionConfig::hop_weight(int i) const {
  return alpha * std::pow(1.0 - alpha, static_cast<double>(i));
}

ad::Var edge_scores(ad::Var h, const Graph& graph, const AttentionHead& head, ad::Var relations) {
  const Eigen::Index d = head.w_head.cols();
  if (head.w_head.rows() != h.cols() || head.w_tail.rows() != h.cols() || head.w_tail.cols() != d ||
      head.w_rel.cols() != d || head.w_rel.rows() != relations.cols() ||
      head.v_attn.rows() != 1 || head.v_attn.cols() != 3 * d) {
    throw ShapeError("edge_scores: head parameter shapes do not match model dimension " +
                     std::to_string(d));
  }
  if (graph.num_relations() > relations.rows()) {
    throw ShapeError("edge_scores: graph has " + std::to_string(graph.num_relations()) +
                     " relations but the relation table has " + std::to_string(relations.rows()));
  }
  using namespace ad;
  const Var src_term = matmul_nt(tanh(matmul(h, head.w_head)), slice_cols(head.v_attn, 0, d));
  const Var dst_term = matmul_nt(tanh(matmul(h, head.w_tail)), slice_cols(head.v_attn, d, d));
  const Var rel_term =
      matmul_nt(tanh(matmul(relations, head.w_rel)), slice_cols(head.v_attn, 2 * d, d));
  const Var summed = add(add(gather_rows(src_term, graph.sources()),
                             gather_rows(dst_term, graph.destinations())),
                         gather_rows(rel_term, graph.relations()));
  return leaky_relu(summed);
}

ad::Var attention_weights(ad::Var scores, const Graph& graph) {
  for (NodeId v = 0; v < graph.num_nodes(); ++v) {
    if (graph.incoming(v).empty()) {
      throw ShapeError("attention_weights: node " + std::to_string(v) +
                       " has no incoming edge; prepare the graph with with_isolated_self_loops");
    }
  }
  return ad::segment_softmax(scores, graph.offsets());
}

namespace {

// out.row(i) += coef * sum over edges (j -> i) of att[e] * in.row(j)
void spmm_accumulate(const Graph& graph, const Matrix& att, const Matrix& in, double coef,
                     Matrix& out) {
  const auto src = graph.sources();
  for (NodeId i = 0; i < graph.num_nodes(); ++i) {
    const EdgeRange r = graph.incoming(i);
    for (std::size_t e = r.begin; e < r.end; ++e) {
      out.row(i) += (coef * att(static_cast<Eigen::Index>(e), 0)) * in.row(src[e]);
    }
  }
}

}  // namespace

ad::Var attention_diffusion(ad::Var attention, ad::Var h, const DiffusionConfig& cfg,
                            const Graph& graph) {
  cfg.validate();
  if (attention.cols() != 1 || attention.rows() != static_cast<Eigen::Index>(graph.num_edges())) {
    throw ShapeError("attention_diffusion: attention must be one column per edge");
  }
  if (h.rows() != graph.num_nodes()) {
    throw ShapeError("attention_diffusion: feature rows do not match node count");
  }
  ad::Tape& tape = *h.tape();
  const bool keep = tape.needs_grad(attention.id()) || tape.needs_grad(h.id());
  const double alpha = cfg.alpha;
  const Matrix& a = attention.value();
  const Matrix& z0 = h.value();

  std::vector<Matrix> iterates;
  if (keep) iterates.reserve(static_cast<std::size_t>(cfg.hops));
  Matrix z = z0;
  for (int k = 0; k < cfg.hops; ++k) {
    Matrix next = alpha * z0;
    spmm_accumulate(graph, a, z, 1.0 - alpha, next);
    if (keep) iterates.push_back(std::move(z));
    z = std::move(next);
  }

  const Graph* gp = &graph;
  return tape.record(
      "attention_diffusion", std::move(z), {attention, h},
      [attention, h, alpha, gp, iterates = std::move(iterates)](ad::Tape& t, int self) {
        const auto src = gp->sources();
        const auto dst = gp->destinations();
        const Matrix& a = t.value(attention.id());
        const bool want_att = t.needs_grad(attention.id());
        Matrix g = t.grad_buffer(self);
        Matrix g_teleport = Matrix::Zero(g.rows(), g.cols());
        for (auto k = static_cast<std::ptrdiff_t>(iterates.size()) - 1; k >= 0; --k) {
          g_teleport += alpha * g;
          if (want_att) {
            Matrix& ga = t.grad_buffer(attention.id());
            const Matrix& zk = iterates[static_cast<std::size_t>(k)];
            for (std::size_t e = 0; e < src.size(); ++e) {
              ga(static_cast<Eigen::Index>(e), 0) += (1.0 - alpha) * g.row(dst[e]).dot(zk.row(src[e]));
            }
          }
          Matrix prev = Matrix::Zero(g.rows(), g.cols());
          for (std::size_t e = 0; e < src.size(); ++e) {
            prev.row(src[e]) += ((1.0 - alpha) * a(static_cast<Eigen::Index>(e), 0)) * g.row(dst[e]);
          }
          g = std::move(prev);
        }
        if (t.needs_grad(h.id())) t.grad_buffer(h.id()) += g + g_teleport;
      });
}

Matrix dense_attention(std::span<const double> edge_attention, const Graph& graph) {
  if (edge_attention.size() != graph.num_edges()) {
    throw ShapeError("dense_attention: need one value per edge");
  }
  Matrix a = Matrix::Zero(graph.num_nodes(), graph.num_nodes());
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    const Edge& ed = graph.edge(e);
    a(ed.dst, ed.src) += edge_attention[e];
  }
  return a;
}

Matrix exact_diffusion_oracle(const Matrix& attention, double alpha) {
  DiffusionConfig{alpha, 1}.validate();
  if (attention.rows() != attention.cols()) throw ShapeError("exact_diffusion_oracle: square matrix required");
  const Eigen::Index n = attention.rows();
  const Matrix system = Matrix::Identity(n, n) - (1.0 - alpha) * attention;
  Matrix ppr = alpha * dense_solve(system, Matrix::Identity(n, n));
  const Vector attention_rows = attention.rowwise().sum();
  const Vector rows = ppr.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(attention_rows(i) - 1.0) <= 1e-12 && std::abs(rows(i) - 1.0) > 1e-9) {
      throw NumericError("exact_diffusion_oracle: row " + std::to_string(i) +
                         " of the diffusion matrix does not sum to 1");
    }
  }
  return ppr;
}

ad::Var multi_head_diffusion(ad::Var h, const Graph& graph, std::span<const AttentionHead> heads,
                             ad::Var relations, ad::Var w_out, const LayerNormParams* layer_norm,
                             const DiffusionLayerOptions& options, ad::Rng& rng,
                             std::vector<ad::Var>* attention_out) {
  if (heads.empty()) throw ShapeError("multi_head_diffusion: need at least one head");
  const Eigen::Index d = h.cols();
  if (w_out.rows() != static_cast<Eigen::Index>(heads.size()) * d) {
    throw ShapeError("multi_head_diffusion: W_o must have heads*d = " +
                     std::to_string(static_cast<Eigen::Index>(heads.size()) * d) + " rows, got " +
                     shape_string(w_out.value()));
  }
  const ad::Var normalized = layer_norm ? ad::layer_norm(h, layer_norm->gamma, layer_norm->beta) : h;
  std::vector<ad::Var> outputs;
  outputs.reserve(heads.size());
  for (const AttentionHead& head : heads) {
    const ad::Var attention = attention_weights(edge_scores(normalized, graph, head, relations), graph);
    if (attention_out) attention_out->push_back(attention);
    const ad::Var dropped = ad::dropout(attention, options.attention_dropout, options.train, rng);
    outputs.push_back(options.one_hop ? ad::edge_spmm(dropped, normalized, graph)
                                      : attention_diffusion(dropped, normalized, options.diffusion, graph));
  }
  const ad::Var joined = outputs.size() == 1 ? outputs.front() : ad::concat_cols(outputs);
  return ad::matmul(joined, w_out);
}

}  // namespace magna
