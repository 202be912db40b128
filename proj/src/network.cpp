#include "magna/network.hpp"

#include <string>

namespace magna {

void NetworkConfig::validate() const {
  if (blocks < 1) throw ConfigError("network: blocks must be >= 1");
  if (dim < 1) throw ConfigError("network: dim must be >= 1");
  if (heads < 1) throw ConfigError("network: heads must be >= 1");
  if (ffn_dim < 0) throw ConfigError("network: ffn_dim must be >= 0");
  if (input_dim < 1) throw ConfigError("network: input_dim must be >= 1");
  if (relation_dim < 1) throw ConfigError("network: relation_dim must be >= 1");
  if (num_relations < 1) throw ConfigError("network: num_relations must be >= 1");
  if (!(attention_dropout >= 0.0 && attention_dropout < 1.0) ||
      !(feature_dropout >= 0.0 && feature_dropout < 1.0)) {
    throw ConfigError("network: dropout rates must lie in [0, 1)");
  }
  diffusion.validate();
}

MagnaNetwork::MagnaNetwork(NetworkConfig config) : config_(std::move(config)) { config_.validate(); }

std::string MagnaNetwork::block_prefix(int block) { return "block" + std::to_string(block) + "."; }

void MagnaNetwork::init_params(ParamStore& params, ad::Rng& rng) const {
  const NetworkConfig& c = config_;
  const Eigen::Index d = c.dim;
  params.add("input.weight", glorot_uniform(c.input_dim, d, rng));
  params.add("input.bias", Matrix::Zero(1, d));
  params.add("relation.embedding", glorot_uniform(c.num_relations, c.relation_dim, rng));
  for (int l = 0; l < c.blocks; ++l) {
    const std::string p = block_prefix(l);
    for (int m = 0; m < c.heads; ++m) {
      const std::string hp = p + "head" + std::to_string(m) + ".";
      params.add(hp + "w_head", glorot_uniform(d, d, rng));
      params.add(hp + "w_tail", glorot_uniform(d, d, rng));
      params.add(hp + "w_rel", glorot_uniform(c.relation_dim, d, rng));
      params.add(hp + "v_attn", glorot_uniform(1, 3 * d, rng));
    }
    params.add(p + "w_out", glorot_uniform(c.heads * d, d, rng));
    if (!c.ablation.no_layernorm) {
      params.add(p + "ln1.gamma", Matrix::Ones(1, d));
      params.add(p + "ln1.beta", Matrix::Zero(1, d));
    }
    if (!c.ablation.no_feedforward) {
      const Eigen::Index f = c.resolved_ffn_dim();
      if (!c.ablation.no_layernorm) {
        params.add(p + "ln2.gamma", Matrix::Ones(1, d));
        params.add(p + "ln2.beta", Matrix::Zero(1, d));
      }
      params.add(p + "ffn.w1", glorot_uniform(d, f, rng));
      params.add(p + "ffn.b1", Matrix::Zero(1, f));
      params.add(p + "ffn.w2", glorot_uniform(f, d, rng));
      params.add(p + "ffn.b2", Matrix::Zero(1, d));
    }
  }
}

ad::Var MagnaNetwork::block_forward(ad::Tape& tape, ParamStore& params, int block, ad::Var h_in,
                                    ad::Var relations, const Graph& graph, bool train,
                                    ad::Rng& rng, BlockAttention* attention) const {
  const NetworkConfig& c = config_;
  if (h_in.cols() != c.dim || h_in.rows() != graph.num_nodes()) {
    throw ShapeError("block_forward: expected " + std::to_string(graph.num_nodes()) + "x" +
                     std::to_string(c.dim) + " input, got " + shape_string(h_in.value()));
  }
  const std::string p = block_prefix(block);
  auto bind = [&](const std::string& name) { return tape.param(params.at(p + name)); };

  const ad::Var x = ad::dropout(h_in, c.feature_dropout, train, rng);

  std::vector<AttentionHead> heads;
  heads.reserve(static_cast<std::size_t>(c.heads));
  for (int m = 0; m < c.heads; ++m) {
    const std::string hp = "head" + std::to_string(m) + ".";
    heads.push_back({bind(hp + "w_head"), bind(hp + "w_tail"), bind(hp + "w_rel"), bind(hp + "v_attn")});
  }
  LayerNormParams ln1;
  if (!c.ablation.no_layernorm) ln1 = {bind("ln1.gamma"), bind("ln1.beta")};

  DiffusionLayerOptions options;
  options.diffusion = c.diffusion;
  options.one_hop = c.ablation.no_diffusion;
  options.attention_dropout = c.attention_dropout;
  options.train = train;
  const ad::Var mixed =
      multi_head_diffusion(x, graph, heads, relations, bind("w_out"),
                           c.ablation.no_layernorm ? nullptr : &ln1, options, rng,
                           attention ? &attention->heads : nullptr);
  const ad::Var hat = ad::add(mixed, x);

  if (c.ablation.no_feedforward) return ad::elu(hat);

  const ad::Var normalized =
      c.ablation.no_layernorm ? hat : ad::layer_norm(hat, bind("ln2.gamma"), bind("ln2.beta"));
  ad::Var hidden = ad::relu(ad::add_bias(ad::matmul(normalized, bind("ffn.w1")), bind("ffn.b1")));
  hidden = ad::dropout(hidden, c.feature_dropout, train, rng);
  return ad::add(ad::add_bias(ad::matmul(hidden, bind("ffn.w2")), bind("ffn.b2")), hat);
}

ad::Var MagnaNetwork::forward(ad::Tape& tape, ParamStore& params, ad::Var input, const Graph& graph,
                              bool train, ad::Rng& rng, std::vector<BlockAttention>* attention) const {
  const NetworkConfig& c = config_;
  if (input.cols() != c.input_dim) {
    throw ShapeError("network: input has " + std::to_string(input.cols()) +
                     " columns, config expects " + std::to_string(c.input_dim));
  }
  if (graph.num_relations() > c.num_relations) {
    throw ShapeError("network: graph has more relations than the relation table");
  }
  ad::Var h = ad::add_bias(ad::matmul(input, tape.param(params.at("input.weight"))),
                           tape.param(params.at("input.bias")));
  const ad::Var relations = tape.param(params.at("relation.embedding"));
  if (attention) attention->assign(static_cast<std::size_t>(c.blocks), {});
  for (int l = 0; l < c.blocks; ++l) {
    h = block_forward(tape, params, l, h, relations, graph, train, rng,
                      attention ? &(*attention)[static_cast<std::size_t>(l)] : nullptr);
  }
  return h;
}

}  // namespace magna
