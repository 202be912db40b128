#pragma once

#include "magna/autograd.hpp"
#include "magna/graph.hpp"

#include <span>
#include <vector>

namespace magna {

// Teleport probability alpha and hop count K of the personalized-PageRank
// diffusion over the attention matrix. Hop weights are alpha * (1 - alpha)^i.
struct DiffusionConfig {
  double alpha = 0.1;
  int hops = 6;

  void validate() const;
  double hop_weight(int i) const;
};

// Trainable weights of one attention head, bound to a tape. Row-vector
// convention: node features are rows, so W_h h_i is computed as H * w_head.
struct AttentionHead {
  ad::Var w_head;  // d x d, applied to the edge source
  ad::Var w_tail;  // d x d, applied to the edge destination
  ad::Var w_rel;   // d_r x d, applied to relation embeddings
  ad::Var v_attn;  // 1 x 3d
};

struct LayerNormParams {
  ad::Var gamma;
  ad::Var beta;
};

// s_e = LeakyReLU(v_a . tanh([W_h h_src | W_t h_dst | W_r r_rel])) for every
// edge, returned as an |E| x 1 column aligned with graph.edges(). tanh acts
// elementwise, so the dot product splits into per-node and per-relation terms
// that are computed once and gathered per edge.
ad::Var edge_scores(ad::Var h, const Graph& graph, const AttentionHead& head, ad::Var relations);

// Softmax of the scores over each destination's incoming edges. Every node
// must have at least one incoming edge (see with_isolated_self_loops).
ad::Var attention_weights(ad::Var scores, const Graph& graph);

// Z0 = H, Z(k+1) = (1 - alpha) A Z(k) + alpha Z0; returns Z(K). Recorded as a
// single tape node that keeps the K iterates for the backward sweep.
ad::Var attention_diffusion(ad::Var attention, ad::Var h, const DiffusionConfig& cfg,
                            const Graph& graph);

// Dense N x N attention matrix, row = destination, column = source.
Matrix dense_attention(std::span<const double> edge_attention, const Graph& graph);

// alpha * (I - (1 - alpha) A)^-1 by dense solve. Rows sum to one for
// row-stochastic A; checked to 1e-9.
Matrix exact_diffusion_oracle(const Matrix& attention, double alpha);

struct DiffusionLayerOptions {
  DiffusionConfig diffusion;
  bool one_hop = false;  // A * H instead of the K-step diffusion
  double attention_dropout = 0.0;
  bool train = false;
};

// LN(H) (identity when layer_norm is null), then one attention diffusion per
// head over the shared normalized input, concatenated in head order and
// mixed by w_out ((M*d) x d). If attention_out is given it receives each
// head's edge attention before dropout.
ad::Var multi_head_diffusion(ad::Var h, const Graph& graph, std::span<const AttentionHead> heads,
                             ad::Var relations, ad::Var w_out, const LayerNormParams* layer_norm,
                             const DiffusionLayerOptions& options, ad::Rng& rng,
                             std::vector<ad::Var>* attention_out = nullptr);

}  // namespace magna
