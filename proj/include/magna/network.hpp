#pragma once

#include "magna/attention.hpp"
#include "magna/params.hpp"

#include <string>
#include <vector>

namespace magna {

struct AblationFlags {
  bool no_diffusion = false;    // one-hop A * LN(H) aggregation
  bool no_layernorm = false;    // both layer norms become identity
  bool no_feedforward = false;  // feed-forward sub-layer replaced by elu

  bool gat_equivalent() const { return no_diffusion && no_layernorm && no_feedforward; }
};

struct NetworkConfig {
  int blocks = 2;
  int dim = 64;
  int heads = 8;
  int ffn_dim = 0;  // 0 means "same as dim"
  DiffusionConfig diffusion;
  double attention_dropout = 0.0;
  double feature_dropout = 0.0;
  AblationFlags ablation;
  int input_dim = 0;
  int relation_dim = 100;
  int num_relations = 1;

  int resolved_ffn_dim() const { return ffn_dim > 0 ? ffn_dim : dim; }
  void validate() const;
};

// Edge attention of every head in one block, before dropout.
struct BlockAttention {
  std::vector<ad::Var> heads;
};

// Stack of MAGNA blocks behind a linear input projection. Parameters live in
// a ParamStore under the names produced by init_params:
//   input.weight, input.bias, relation.embedding,
//   block{l}.head{m}.{w_head,w_tail,w_rel,v_attn}, block{l}.w_out,
//   block{l}.ln{1,2}.{gamma,beta}, block{l}.ffn.{w1,b1,w2,b2}
class MagnaNetwork {
 public:
  explicit MagnaNetwork(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }

  // Glorot-uniform weights and embeddings, zero biases, unit layer-norm gains.
  void init_params(ParamStore& params, ad::Rng& rng) const;

  // input: N x input_dim. graph must already carry isolated-node self-loops.
  ad::Var forward(ad::Tape& tape, ParamStore& params, ad::Var input, const Graph& graph,
                  bool train, ad::Rng& rng, std::vector<BlockAttention>* attention = nullptr) const;

  ad::Var block_forward(ad::Tape& tape, ParamStore& params, int block, ad::Var h_in,
                        ad::Var relations, const Graph& graph, bool train, ad::Rng& rng,
                        BlockAttention* attention = nullptr) const;

  static std::string block_prefix(int block);

 private:
  NetworkConfig config_;
};

}  // namespace magna
