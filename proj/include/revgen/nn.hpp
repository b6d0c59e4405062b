// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Small transformer toolkit on top of the autodiff tensors: linear layers
// (with optional low-rank adapters), layer norm, multi-head attention, MLP
// blocks, AdamW, sin-cos embeddings and named-parameter checkpoints.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "revgen/rng.hpp"
#include "revgen/tensor.hpp"

namespace revgen {

// Named parameter registry. Modules create their tensors through one of these
// so checkpoints and optimizers see a stable, ordered list.
class ParamStore {
 public:
  Tensor create(const std::string& name, int rows, int cols, double stddev, RngStream& rng,
                bool trainable = true);
  Tensor create_zeros(const std::string& name, int rows, int cols, bool trainable = true);
  Tensor create_const(const std::string& name, int rows, int cols, double value,
                      bool trainable = true);

  std::vector<Tensor> trainable() const;
  const std::vector<std::pair<std::string, Tensor>>& all() const { return params_; }
  Tensor find(const std::string& name) const;

  // Checkpoint directory: manifest.json + one tensor file per parameter.
  void save(const std::string& dir, const std::string& extra_json = "{}") const;
  // Loads values into already-created parameters; shapes must match.
  std::string load(const std::string& dir);  // returns the manifest "extra" text
  // FNV-1a over the float32 serialization of every parameter, in order.
  uint64_t checksum() const;
  void freeze_all();

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
};

struct Linear {
  Tensor w;  // [out, in]
  Tensor b;  // [1, out]
  // Optional low-rank adapter: w_eff = w + (alpha/r) * b_lr * a_lr.
  Tensor lora_a;  // [r, in]
  Tensor lora_b;  // [out, r]
  double lora_scale = 0.0;
  double lora_dropout = 0.0;

  static Linear make(ParamStore& ps, const std::string& name, int in, int out, RngStream& rng);
  Tensor forward(const Tensor& x, RngStream* lora_drop = nullptr) const;
  int in_features() const { return w.cols(); }
  int out_features() const { return w.rows(); }
};

struct LayerNormLayer {
  Tensor gamma, beta;
  static LayerNormLayer make(ParamStore& ps, const std::string& name, int dim);
  Tensor forward(const Tensor& x) const { return layer_norm(x, gamma, beta); }
};

struct Mlp {
  Linear fc1, fc2;
  static Mlp make(ParamStore& ps, const std::string& name, int dim, int hidden, RngStream& rng);
  Tensor forward(const Tensor& x) const { return fc2.forward(silu(fc1.forward(x))); }
};

struct MultiHeadAttention {
  int heads = 1;
  Linear q, k, v, o;
  static MultiHeadAttention make(ParamStore& ps, const std::string& name, int dim, int kv_dim,
                                 int heads, RngStream& rng);
  // queries from `qx` [Tq,dim], keys/values from `kvx` [Tk,kv_dim]
  Tensor forward(const Tensor& qx, const Tensor& kvx, RngStream* lora_drop = nullptr) const;
};

class AdamW {
 public:
  explicit AdamW(std::vector<Tensor> params, double lr = 1e-4, double beta1 = 0.9,
                 double beta2 = 0.999, double eps = 1e-8, double weight_decay = 0.0);
  void step();
  void zero_grad();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  long steps_taken() const { return step_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_, wd_;
  long step_ = 0;
};

Tensor dropout(const Tensor& x, double p, RngStream& stream);

// Fixed sin-cos embeddings (returned as plain data, no grad).
std::vector<double> sincos_embedding_1d(double pos, int dim, double max_period = 10000.0);
// One row per (y,x) cell of an h x w grid.
Tensor sincos_grid_2d(int h, int w, int dim);
// One row per 3-D position (coordinates in grid units).
Tensor sincos_positions_3d(const std::vector<std::array<double, 3>>& pos, int dim);

}  // namespace revgen
