// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// The two rectified-flow stages. SS Flow denoises a dense low-resolution
// occupancy grid conditioned on the global token list; SLAT Flow denoises
// per-voxel latents conditioned on the per-view token lists through weighted
// cross-attention fusion. A small per-voxel codec maps color+opacity to the
// latent space and back.

#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "revgen/conditioning.hpp"
#include "revgen/scene.hpp"

namespace revgen {

struct SparseStructure {
  int resolution = 16;
  std::vector<std::array<int, 3>> coords;  // unique, in [0,R)^3
  int count() const { return static_cast<int>(coords.size()); }
  size_t flat(int i) const {
    return ((size_t)coords[i][2] * resolution + coords[i][1]) * resolution + coords[i][0];
  }
};

struct StructuredLatent {
  SparseStructure positions;
  int dim = 8;
  std::vector<double> latents;  // count * dim
  int count() const { return positions.count(); }
};

// Cells with value > threshold become coordinates. Throws on an empty result.
SparseStructure sparsify(const Array& grid, double threshold = 0.0);
SparseStructure sparse_from_object(const VoxelObject& obj);
Array dense_from_sparse(const SparseStructure& ss);  // +-1 grid

// ---------------------------------------------------------------------------
// Codec

struct SLATCodecConfig {
  int latent_dim = 8;
  int hidden = 32;
};

class SLATCodec {
 public:
  SLATCodec(const SLATCodecConfig& cfg, uint64_t seed);

  const SLATCodecConfig& config() const { return cfg_; }
  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }

  // attrs rows are (r, g, b, opacity_logit).
  Tensor encode(const Tensor& attrs) const;
  // Returns (sigmoid rgb, raw logit) rows; differentiable.
  Tensor decode(const Tensor& latents) const;

  StructuredLatent encode_appearance(const VoxelObject& obj, const SparseStructure& ss) const;
  VoxelObject decode_object(const StructuredLatent& x) const;

  void save(const std::string& dir) const;
  static std::unique_ptr<SLATCodec> load(const std::string& dir);

 private:
  SLATCodecConfig cfg_;
  ParamStore ps_;
  Linear enc1_, enc2_, dec1_, dec2_;
};

struct CodecTrainConfig {
  int steps = 8000;
  int batch = 128;
  double lr = 1e-3;
  uint64_t seed = 0;
};
TrainStats train_codec(SLATCodec& codec, const std::string& dataset_dir,
                       const CodecTrainConfig& cfg);

// ---------------------------------------------------------------------------
// Flow transformers

struct FlowConfig {
  int width = 128;
  int blocks = 6;
  int heads = 4;
  int mlp_hidden = 256;
  int cond_dim = 64;
  int cond_len = 32;
  // SS stage
  int ss_resolution = 16;
  int ss_patch = 2;
  // SLAT stage
  int latent_dim = 8;
  ConditionNetConfig cond_net;
};

struct FlowBlock {
  LayerNormLayer ln_self, ln_cross, ln_mlp;
  MultiHeadAttention self_attn, cross_attn;
  Mlp mlp;
  // SLAT fusion weight head (unused in the SS stage).
  Linear fuse1, fuse2;
};

class SSFlowModel {
 public:
  SSFlowModel(const FlowConfig& cfg, uint64_t seed);

  const FlowConfig& config() const { return cfg_; }
  ParamStore& params() { return ps_; }
  ConditionNet& cond_net() { return *cond_net_; }
  const ConditionNet& cond_net() const { return *cond_net_; }

  // x is the [R^3,1] grid state; cond a [cond_len, cond_dim] token list.
  Tensor velocity(const Tensor& x, double t, const Tensor& cond) const;
  std::vector<double> velocity_plain(const std::vector<double>& x, double t,
                                     const Tensor& cond) const;

  void save(const std::string& dir) const;
  static std::unique_ptr<SSFlowModel> load(const std::string& dir);

 private:
  FlowConfig cfg_;
  ParamStore ps_;
  std::unique_ptr<ConditionNet> cond_net_;
  Linear in_proj_, out_proj_;
  Linear t_embed1_, t_embed2_;
  Tensor pos_embed_;  // [tokens, width]
  std::vector<FlowBlock> blocks_;
  std::shared_ptr<std::vector<int64_t>> patchify_map_, unpatchify_map_;
};

class SLATFlowModel {
 public:
  SLATFlowModel(const FlowConfig& cfg, uint64_t seed);

  const FlowConfig& config() const { return cfg_; }
  ParamStore& params() { return ps_; }
  ConditionNet& cond_net() { return *cond_net_; }
  const ConditionNet& cond_net() const { return *cond_net_; }

  // X: [V, latent_dim] latents at `positions`; conds: one token list per view
  // (throws if empty). Per block: self-attention, per-view cross-attention,
  // sigmoid fusion weights normalized to sum 1 across views, weighted sum,
  // feed-forward.
  Tensor velocity(const Tensor& x, const SparseStructure& positions, double t,
                  const std::vector<Tensor>& conds) const;
  std::vector<double> velocity_plain(const std::vector<double>& x,
                                     const SparseStructure& positions, double t,
                                     const std::vector<Tensor>& conds) const;
  // Fusion weights of the first block for inspection/tests: [V, N].
  Tensor fusion_weights(const Tensor& x, const SparseStructure& positions, double t,
                        const std::vector<Tensor>& conds) const;

  void save(const std::string& dir) const;
  static std::unique_ptr<SLATFlowModel> load(const std::string& dir);

 private:
  Tensor run(const Tensor& x, const SparseStructure& positions, double t,
             const std::vector<Tensor>& conds, Tensor* first_block_weights) const;

  FlowConfig cfg_;
  ParamStore ps_;
  std::unique_ptr<ConditionNet> cond_net_;
  Linear in_proj_, out_proj_;
  Linear t_embed1_, t_embed2_;
  std::vector<FlowBlock> blocks_;
};

// ---------------------------------------------------------------------------
// Conditional flow matching

// Draws t ~ U[0,1) and eps ~ N(0,I), forms x_t = (1-t) x0 + t eps and returns
// mean squared error between velocity(x_t, t) and (eps - x0).
Tensor cfm_loss(const std::function<Tensor(const Tensor&, double)>& velocity,
                const std::vector<double>& x0, int rows, int cols, RngStream& stream);

struct FlowTrainConfig {
  int steps = 4000;
  double lr = 1e-4;
  double drop_p = 0.3;
  int min_views = 1;
  int max_views = 4;
  uint64_t seed = 0;
  int log_every = 100;
};

TrainStats train_ss_flow(SSFlowModel& model, const EncoderModel& encoder,
                         const std::string& dataset_dir, const FlowTrainConfig& cfg);
TrainStats train_slat_flow(SLATFlowModel& model, const SLATCodec& codec,
                           const EncoderModel& encoder, const std::string& dataset_dir,
                           const FlowTrainConfig& cfg);

}  // namespace revgen
