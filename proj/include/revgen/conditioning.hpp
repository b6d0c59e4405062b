// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Condition net: four cross-attention blocks that progressively fuse the
// encoder's layer-wise features into a fixed-length token list. The same
// anatomy serves the global condition (keys from all views concatenated) and
// the per-view conditions (keys from one view). Each net owns a learned null
// token list for the classifier-free branch.

#pragma once

#include "revgen/encoder.hpp"
#include "revgen/nn.hpp"

namespace revgen {

struct ConditionNetConfig {
  int blocks = 4;     // one per selected encoder layer
  int token_len = 32;
  int dim = 64;
  int feat_dim = 64;  // encoder feature dimension
  int heads = 4;
  int mlp_hidden = 256;
};

struct ConditionBlock {
  Linear adapter;  // feat_dim -> dim, applied to keys/values
  LayerNormLayer ln_q, ln_mlp;
  MultiHeadAttention attn;
  Mlp mlp;
};

class ConditionNet {
 public:
  // Parameters are created inside `ps` under `prefix` so the net can live in
  // the same checkpoint as its flow model.
  ConditionNet(const ConditionNetConfig& cfg, ParamStore& ps, const std::string& prefix,
               RngStream& rng);

  const ConditionNetConfig& config() const { return cfg_; }

  // Block i cross-attends the running token list against feats[i] ([*,feat_dim]).
  Tensor forward(const std::vector<Tensor>& layer_feats) const;

  // Global condition: keys are each layer's features concatenated across views.
  Tensor global_condition(const FeatureStack& fs) const;
  // Per-view condition for view k.
  Tensor per_view_condition(const FeatureStack& fs, int view) const;
  std::vector<Tensor> per_view_conditions(const FeatureStack& fs) const;

  Tensor null_condition() const { return null_tokens_; }

 private:
  ConditionNetConfig cfg_;
  Tensor t_init_;
  Tensor null_tokens_;
  std::vector<ConditionBlock> blocks_;
};

// Training-time condition dropout: with probability p returns the null
// condition. At inference (training=false) returns the input unchanged.
Tensor drop_condition(const Tensor& cond, const Tensor& null_cond, RngStream& stream, double p,
                      bool training);

}  // namespace revgen
