// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode autodiff over dense row-major double matrices. Every tensor in
// the graph is 2-D ([rows, cols]; scalars are [1,1]). Values and gradients are
// plain std::vector<double>; the heavy inner loops route through the
// dispatchable kernels, so scalar/SIMD selection covers training, sampling and
// the render-loss gradients alike.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace revgen {

class RngStream;

struct TensorNode {
  int rows = 0, cols = 0;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;

  size_t numel() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor from_data(int rows, int cols, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v);
  static Tensor randn(int rows, int cols, RngStream& stream, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  size_t numel() const { return node_->numel(); }
  bool requires_grad() const { return node_->requires_grad; }
  std::vector<double>& data() { return node_->value; }
  const std::vector<double>& data() const { return node_->value; }
  std::vector<double>& grad() { return node_->grad; }
  const std::vector<double>& grad() const { return node_->grad; }
  double item() const;

  // Reverse pass from this (scalar) tensor.
  void backward();
  void zero_grad();

  std::shared_ptr<TensorNode>& node() { return node_; }
  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// Escape hatch for fused ops (renderer, convolutions) that compute their own
// forward value and backward rule.
Tensor custom_op(int rows, int cols, std::vector<double> value, std::vector<Tensor> parents,
                 std::function<void(TensorNode&)> backward);

// Elementwise / broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& x, const Tensor& bias);     // [T,d] + [1,d]
Tensor mul_bcast_col(const Tensor& x, const Tensor& w);   // [T,d] * [T,1]
Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);

// Matrix products.
Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k] x [k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k] x [n,k]^T

// Nonlinearities.
Tensor silu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor abs_t(const Tensor& x);
Tensor acos_clamped(const Tensor& x, double eps = 1e-6);

// Normalization / attention pieces.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor softmax_rows(const Tensor& x);

// Reductions.
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor mean_rows(const Tensor& x);  // [T,d] -> [1,d]

// Structure.
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, int r0, int r1);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, int c0, int c1);
Tensor reshape(const Tensor& x, int rows, int cols);
// out[i] = map[i] >= 0 ? x_flat[map[i]] : 0. Backward scatter-adds.
Tensor gather_map(const Tensor& x, std::shared_ptr<const std::vector<int64_t>> map, int rows,
                  int cols);
Tensor detach(const Tensor& x);

// Row-wise small-vector helpers (camera heads).
Tensor rows_normalize(const Tensor& x, double eps = 1e-12);
Tensor rows_dot(const Tensor& a, const Tensor& b);    // -> [N,1]
Tensor rows_cross(const Tensor& a, const Tensor& b);  // [N,3]

// Single-channel 2-D valid convolution with a fixed (non-learned) symmetric
// kernel; x is [H*W,1].
Tensor conv2d_fixed(const Tensor& x, int h, int w, const std::vector<double>& kernel, int ksize);

// Finite-difference gradient of f at x (central differences), for tests.
std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                      const std::vector<double>& x, double h);

}  // namespace revgen
