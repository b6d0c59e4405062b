// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/conditioning.hpp"

#include "revgen/common.hpp"

namespace revgen {

ConditionNet::ConditionNet(const ConditionNetConfig& cfg, ParamStore& ps,
                           const std::string& prefix, RngStream& rng)
    : cfg_(cfg) {
  t_init_ = ps.create(prefix + ".t_init", cfg.token_len, cfg.dim, 0.02, rng);
  null_tokens_ = ps.create(prefix + ".null", cfg.token_len, cfg.dim, 0.02, rng);
  for (int b = 0; b < cfg.blocks; ++b) {
    ConditionBlock block;
    const std::string base = prefix + ".block" + std::to_string(b);
    block.adapter = Linear::make(ps, base + ".adapter", cfg.feat_dim, cfg.dim, rng);
    block.ln_q = LayerNormLayer::make(ps, base + ".ln_q", cfg.dim);
    block.ln_mlp = LayerNormLayer::make(ps, base + ".ln_mlp", cfg.dim);
    block.attn = MultiHeadAttention::make(ps, base + ".attn", cfg.dim, cfg.dim, cfg.heads, rng);
    block.mlp = Mlp::make(ps, base + ".mlp", cfg.dim, cfg.mlp_hidden, rng);
    blocks_.push_back(block);
  }
}

Tensor ConditionNet::forward(const std::vector<Tensor>& layer_feats) const {
  REVGEN_CHECK(static_cast<int>(layer_feats.size()) == cfg_.blocks,
               "ConditionNet: expected one feature tensor per block");
  Tensor tokens = t_init_;
  for (int b = 0; b < cfg_.blocks; ++b) {
    REVGEN_CHECK(layer_feats[b].defined() && layer_feats[b].rows() > 0,
                 "ConditionNet: empty feature stack");
    const auto& block = blocks_[b];
    Tensor kv = block.adapter.forward(layer_feats[b]);
    tokens = add(tokens, block.attn.forward(block.ln_q.forward(tokens), kv));
    tokens = add(tokens, block.mlp.forward(block.ln_mlp.forward(tokens)));
  }
  return tokens;
}

Tensor ConditionNet::global_condition(const FeatureStack& fs) const {
  REVGEN_CHECK(fs.n_views >= 1, "global_condition: empty feature stack");
  std::vector<Tensor> per_layer;
  for (int s = 0; s < cfg_.blocks; ++s) {
    std::vector<Tensor> views;
    for (int v = 0; v < fs.n_views; ++v) views.push_back(fs.feats[v][s]);
    per_layer.push_back(views.size() == 1 ? views[0] : concat_rows(views));
  }
  return forward(per_layer);
}

Tensor ConditionNet::per_view_condition(const FeatureStack& fs, int view) const {
  REVGEN_CHECK(view >= 0 && view < fs.n_views, "per_view_condition: view out of range");
  std::vector<Tensor> per_layer;
  for (int s = 0; s < cfg_.blocks; ++s) per_layer.push_back(fs.feats[view][s]);
  return forward(per_layer);
}

std::vector<Tensor> ConditionNet::per_view_conditions(const FeatureStack& fs) const {
  std::vector<Tensor> out;
  for (int v = 0; v < fs.n_views; ++v) out.push_back(per_view_condition(fs, v));
  return out;
}

Tensor drop_condition(const Tensor& cond, const Tensor& null_cond, RngStream& stream, double p,
                      bool training) {
  REVGEN_CHECK(p >= 0.0 && p <= 1.0, "drop_condition: p out of range");
  if (!training) return cond;
  return stream.uniform() < p ? null_cond : cond;
}

}  // namespace revgen
