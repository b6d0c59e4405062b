// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Miniature multi-view stereo encoder: patch embedding, eight transformer
// layers alternating frame-wise and global self-attention, and camera /
// depth / point-map heads. Layer outputs after each global layer form the
// feature stack consumed by the condition nets. Optional low-rank adapters
// can be attached to the attention projections.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "revgen/nn.hpp"
#include "revgen/scene.hpp"

namespace revgen {

struct EncoderConfig {
  int image_size = 64;
  int patch = 8;
  int dim = 64;
  int layers = 8;          // even count; layers 0,2,.. frame-wise, 1,3,.. global
  int heads = 4;
  int mlp_hidden = 256;
  std::vector<int> selected_layers = {1, 3, 5, 7};  // 0-based taps (the global layers)

  int tokens_per_view() const {
    const int g = image_size / patch;
    return g * g;
  }
  int feature_dim() const { return dim; }
};

// Per-view token grids at the selected depths: feats[view][s] is
// [tokens_per_view, dim].
struct FeatureStack {
  int n_views = 0;
  int tokens = 0;
  int dim = 0;
  std::vector<std::vector<Tensor>> feats;
};

struct EncoderLayer {
  LayerNormLayer ln_attn, ln_mlp;
  MultiHeadAttention attn;
  Mlp mlp;
  bool framewise = false;
};

struct CameraPrediction {
  Mat3 rotation;      // world-to-camera (canonical frame)
  Vec3 translation;
  double focal_norm;  // fx / width
};

class EncoderModel {
 public:
  EncoderModel(const EncoderConfig& cfg, uint64_t seed);

  const EncoderConfig& config() const { return cfg_; }
  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }
  long parameter_count() const;

  // Features at the selected layers. `truncate_after_layer` limits the trunk
  // to layers [0, truncate_after_layer] (used by the frame-wise isolation
  // test); -1 runs all layers.
  FeatureStack encode(const std::vector<ImageBuffer>& views, int truncate_after_layer = -1,
                      RngStream* lora_drop = nullptr) const;

  // Head outputs from a feature stack.
  struct HeadOutputs {
    std::vector<Tensor> camera_raw;   // per view [1,10]: 6d rot, 3 trans, 1 focal
    std::vector<Tensor> depth;        // per view [H*W,1]
    std::vector<Tensor> points;       // per view [H*W,3] (world frame)
  };
  HeadOutputs heads(const FeatureStack& fs, RngStream* lora_drop = nullptr) const;

  std::vector<CameraPrediction> predict_cameras(const std::vector<ImageBuffer>& views) const;
  // Full head predictions as plain buffers.
  void predict(const std::vector<ImageBuffer>& views, std::vector<CameraPrediction>* cameras,
               std::vector<std::vector<double>>* depths,
               std::vector<std::vector<double>>* points) const;

  // Attach zero-initialized low-rank adapters to every attention qkv/out
  // projection; base weights are frozen. Throws if rank exceeds the smaller
  // weight dimension.
  void apply_lora(int rank, double alpha, double dropout_p);
  bool has_lora() const { return lora_rank_ > 0; }

  void save(const std::string& dir) const;
  static std::unique_ptr<EncoderModel> load(const std::string& dir);

 private:
  Tensor trunk_tokens(const std::vector<ImageBuffer>& views) const;

  EncoderConfig cfg_;
  ParamStore ps_;
  Linear patch_embed_;
  Tensor pos_embed_;
  std::vector<EncoderLayer> layers_;
  // Camera head keeps the token layout: per-token reduction, then an MLP on
  // the flattened grid (mean pooling loses the spatial cues orientation
  // needs).
  Linear head_cam_reduce_, head_cam_hidden_, head_cam_out_;
  Linear head_depth_, head_point_;
  int lora_rank_ = 0;
};

// Camera prediction decoded into a Camera (6d rotation orthonormalized).
Camera camera_from_prediction(const CameraPrediction& p, int image_size);
CameraPrediction prediction_from_raw(const std::vector<double>& raw10);

struct EncoderTrainConfig {
  int steps = 2500;
  double lr = 1e-4;
  int min_views = 1;
  int max_views = 4;
  uint64_t seed = 0;
  int log_every = 100;
};

struct TrainStats {
  std::vector<double> loss_history;  // sampled every log_every steps
  double first_loss = 0;
  double final_loss = 0;
};

// Multi-task training: camera pose (rotation geodesic + translation L2 +
// focal L1) + masked depth L1 + masked point-map L2, unweighted sum.
TrainStats train_encoder(EncoderModel& model, const std::string& dataset_dir,
                         const EncoderTrainConfig& cfg);

// Target tuple for one sampled view set, all relative to the first view.
struct EncoderTargets {
  std::vector<Mat3> rotations;
  std::vector<Vec3> translations;
  std::vector<double> focal_norm;
  std::vector<std::vector<double>> depths;   // 0 = invalid
  std::vector<std::vector<double>> points;   // world frame, 3 per pixel
  std::vector<std::vector<double>> masks;    // 1 where depth valid
};
EncoderTargets make_encoder_targets(const ViewSet& views, const std::vector<int>& pick);

}  // namespace revgen
