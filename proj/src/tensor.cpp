// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "revgen/common.hpp"
#include "revgen/kernels.hpp"
#include "revgen/rng.hpp"

namespace revgen {

namespace {

// Training graphs allocate and free megabyte-sized activation buffers every
// step; with glibc defaults those round-trip through mmap/munmap and the
// kernel dominates the step time. Keep them on the heap instead.
struct MallocTuning {
  MallocTuning() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
#endif
  }
};
const MallocTuning malloc_tuning;

using K = kernels::Ops;
inline const K& kop() { return kernels::active(); }

std::shared_ptr<TensorNode> new_node(int rows, int cols) {
  auto n = std::make_shared<TensorNode>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign((size_t)rows * cols, 0.0);
  return n;
}

bool any_requires(const std::vector<Tensor>& ps) {
  for (const auto& p : ps)
    if (p.node()->requires_grad) return true;
  return false;
}

Tensor wrap(std::shared_ptr<TensorNode> n) { return Tensor(std::move(n)); }

// Builds an op node. If no parent requires grad the backward closure is
// dropped so dead graphs cost nothing.
Tensor op_node(int rows, int cols, std::vector<double> value, std::vector<Tensor> parents,
               std::function<void(TensorNode&)> backward) {
  auto n = std::make_shared<TensorNode>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(value);
  REVGEN_CHECK(n->value.size() == (size_t)rows * cols, "op_node: value size mismatch");
  if (any_requires(parents)) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return wrap(n);
}

void same_shape(const Tensor& a, const Tensor& b, const char* who) {
  REVGEN_CHECK(a.rows() == b.rows() && a.cols() == b.cols(),
               std::string(who) + ": shape mismatch");
}

}  // namespace

Tensor custom_op(int rows, int cols, std::vector<double> value, std::vector<Tensor> parents,
                 std::function<void(TensorNode&)> backward) {
  return op_node(rows, cols, std::move(value), std::move(parents), std::move(backward));
}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
  auto n = new_node(rows, cols);
  n->requires_grad = requires_grad;
  return wrap(n);
}

Tensor Tensor::from_data(int rows, int cols, std::vector<double> data, bool requires_grad) {
  REVGEN_CHECK(data.size() == (size_t)rows * cols, "Tensor::from_data: size mismatch");
  auto n = std::make_shared<TensorNode>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return wrap(n);
}

Tensor Tensor::scalar(double v) { return from_data(1, 1, {v}); }

Tensor Tensor::randn(int rows, int cols, RngStream& stream, double stddev, bool requires_grad) {
  std::vector<double> d((size_t)rows * cols);
  for (auto& x : d) x = stream.normal() * stddev;
  return from_data(rows, cols, std::move(d), requires_grad);
}

double Tensor::item() const {
  REVGEN_CHECK(numel() == 1, "Tensor::item: not a scalar");
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() {
  REVGEN_CHECK(node_, "backward: undefined tensor");
  REVGEN_CHECK(numel() == 1, "backward: root must be scalar");
  REVGEN_CHECK(node_->requires_grad, "backward: root does not require grad");

  // Post-order DFS; reversed list runs consumers before producers.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.push_back({node_.get(), 0});
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      TensorNode* p = n->parents[idx++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward && !n->grad.empty()) {
      for (auto& p : n->parents) p->ensure_grad();
      n->backward(*n);
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  kop().vadd(a.data().data(), b.data().data(), out.data(), out.size());
  return op_node(a.rows(), a.cols(), std::move(out), {a, b}, [](TensorNode& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) kop().axpy(1.0, self.grad.data(), p->grad.data(), self.numel());
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  kop().vsub(a.data().data(), b.data().data(), out.data(), out.size());
  return op_node(a.rows(), a.cols(), std::move(out), {a, b}, [](TensorNode& self) {
    if (self.parents[0]->requires_grad)
      kop().axpy(1.0, self.grad.data(), self.parents[0]->grad.data(), self.numel());
    if (self.parents[1]->requires_grad)
      kop().axpy(-1.0, self.grad.data(), self.parents[1]->grad.data(), self.numel());
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  kop().vmul(a.data().data(), b.data().data(), out.data(), out.size());
  return op_node(a.rows(), a.cols(), std::move(out), {a, b}, [](TensorNode& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    const size_t n = self.numel();
    if (pa->requires_grad)
      for (size_t i = 0; i < n; ++i) pa->grad[i] += self.grad[i] * pb->value[i];
    if (pb->requires_grad)
      for (size_t i = 0; i < n; ++i) pb->grad[i] += self.grad[i] * pa->value[i];
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "div");
  std::vector<double> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] / b.data()[i];
  return op_node(a.rows(), a.cols(), std::move(out), {a, b}, [](TensorNode& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    const size_t n = self.numel();
    if (pa->requires_grad)
      for (size_t i = 0; i < n; ++i) pa->grad[i] += self.grad[i] / pb->value[i];
    if (pb->requires_grad)
      for (size_t i = 0; i < n; ++i)
        pb->grad[i] -= self.grad[i] * pa->value[i] / (pb->value[i] * pb->value[i]);
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  REVGEN_CHECK(bias.rows() == 1 && bias.cols() == x.cols(), "add_bias: bias shape mismatch");
  std::vector<double> out(x.numel());
  const int t = x.rows(), d = x.cols();
  for (int i = 0; i < t; ++i)
    kop().vadd(x.data().data() + (size_t)i * d, bias.data().data(), out.data() + (size_t)i * d, d);
  return op_node(t, d, std::move(out), {x, bias}, [t, d](TensorNode& self) {
    auto& px = self.parents[0];
    auto& pb = self.parents[1];
    if (px->requires_grad) kop().axpy(1.0, self.grad.data(), px->grad.data(), self.numel());
    if (pb->requires_grad)
      for (int i = 0; i < t; ++i)
        kop().axpy(1.0, self.grad.data() + (size_t)i * d, pb->grad.data(), d);
  });
}

Tensor mul_bcast_col(const Tensor& x, const Tensor& w) {
  REVGEN_CHECK(w.cols() == 1 && w.rows() == x.rows(), "mul_bcast_col: weight shape mismatch");
  const int t = x.rows(), d = x.cols();
  std::vector<double> out(x.numel());
  for (int i = 0; i < t; ++i) {
    const double wi = w.data()[i];
    const double* xi = x.data().data() + (size_t)i * d;
    double* oi = out.data() + (size_t)i * d;
    for (int j = 0; j < d; ++j) oi[j] = xi[j] * wi;
  }
  return op_node(t, d, std::move(out), {x, w}, [t, d](TensorNode& self) {
    auto& px = self.parents[0];
    auto& pw = self.parents[1];
    for (int i = 0; i < t; ++i) {
      const double* g = self.grad.data() + (size_t)i * d;
      if (px->requires_grad)
        kop().axpy(pw->value[i], g, px->grad.data() + (size_t)i * d, d);
      if (pw->requires_grad)
        pw->grad[i] += kop().dot(g, px->value.data() + (size_t)i * d, d);
    }
  });
}

Tensor scale(const Tensor& x, double s) {
  std::vector<double> out = x.data();
  kop().scale(s, out.data(), out.size());
  return op_node(x.rows(), x.cols(), std::move(out), {x}, [s](TensorNode& self) {
    if (self.parents[0]->requires_grad)
      kop().axpy(s, self.grad.data(), self.parents[0]->grad.data(), self.numel());
  });
}

Tensor add_scalar(const Tensor& x, double s) {
  std::vector<double> out = x.data();
  for (auto& v : out) v += s;
  return op_node(x.rows(), x.cols(), std::move(out), {x}, [](TensorNode& self) {
    if (self.parents[0]->requires_grad)
      kop().axpy(1.0, self.grad.data(), self.parents[0]->grad.data(), self.numel());
  });
}

// ---------------------------------------------------------------------------
// Matrix products

Tensor matmul(const Tensor& a, const Tensor& b) {
  REVGEN_CHECK(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out((size_t)m * n);
  kop().gemm_nn(a.data().data(), b.data().data(), out.data(), m, n, k, false);
  return op_node(m, n, std::move(out), {a, b}, [m, n, k](TensorNode& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    // dA = dC * B^T ; dB = A^T * dC
    if (pa->requires_grad)
      kop().gemm_nt(self.grad.data(), pb->value.data(), pa->grad.data(), m, k, n, true);
    if (pb->requires_grad)
      kop().gemm_tn(pa->value.data(), self.grad.data(), pb->grad.data(), m, n, k, true);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  REVGEN_CHECK(a.cols() == b.cols(), "matmul_nt: inner dimension mismatch");
  const int m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> out((size_t)m * n);
  kop().gemm_nt(a.data().data(), b.data().data(), out.data(), m, n, k, false);
  return op_node(m, n, std::move(out), {a, b}, [m, n, k](TensorNode& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    // C = A B^T : dA = dC * B ; dB = dC^T * A
    if (pa->requires_grad)
      kop().gemm_nn(self.grad.data(), pb->value.data(), pa->grad.data(), m, k, n, true);
    if (pb->requires_grad)
      kop().gemm_tn(self.grad.data(), pa->value.data(), pb->grad.data(), m, k, n, true);
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities

Tensor silu(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (size_t i = 0; i < out.size(); ++i) {
    const double v = x.data()[i];
    out[i] = v / (1.0 + std::exp(-v));
  }
  return op_node(x.rows(), x.cols(), std::move(out), {x}, [](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    for (size_t i = 0; i < self.numel(); ++i) {
      const double v = p->value[i];
      const double s = 1.0 / (1.0 + std::exp(-v));
      p->grad[i] += self.grad[i] * (s + v * s * (1.0 - s));
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
  return op_node(x.rows(), x.cols(), std::move(out), {x}, [](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    for (size_t i = 0; i < self.numel(); ++i) {
      const double s = self.value[i];
      p->grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor abs_t(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::abs(x.data()[i]);
  return op_node(x.rows(), x.cols(), std::move(out), {x}, [](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    for (size_t i = 0; i < self.numel(); ++i) {
      const double v = p->value[i];
      p->grad[i] += self.grad[i] * (v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0));
    }
  });
}

Tensor acos_clamped(const Tensor& x, double eps) {
  std::vector<double> out(x.numel());
  const double lo = -1.0 + eps, hi = 1.0 - eps;
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::acos(std::clamp(x.data()[i], lo, hi));
  return op_node(x.rows(), x.cols(), std::move(out), {x}, [lo, hi](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    for (size_t i = 0; i < self.numel(); ++i) {
      const double c = std::clamp(p->value[i], lo, hi);
      p->grad[i] += self.grad[i] * (-1.0 / std::sqrt(1.0 - c * c));
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization / attention

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const int t = x.rows(), d = x.cols();
  REVGEN_CHECK(gamma.rows() == 1 && gamma.cols() == d, "layer_norm: gamma shape");
  REVGEN_CHECK(beta.rows() == 1 && beta.cols() == d, "layer_norm: beta shape");
  std::vector<double> out((size_t)t * d);
  auto stats = std::make_shared<std::vector<double>>((size_t)t * 2);  // mean, inv std per row
  for (int i = 0; i < t; ++i) {
    const double* xi = x.data().data() + (size_t)i * d;
    double mean = kop().sum(xi, d) / d;
    double var = 0;
    for (int j = 0; j < d; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= d;
    double inv = 1.0 / std::sqrt(var + eps);
    (*stats)[2 * i] = mean;
    (*stats)[2 * i + 1] = inv;
    double* oi = out.data() + (size_t)i * d;
    for (int j = 0; j < d; ++j) oi[j] = (xi[j] - mean) * inv * gamma.data()[j] + beta.data()[j];
  }
  return op_node(t, d, std::move(out), {x, gamma, beta}, [t, d, stats](TensorNode& self) {
    auto& px = self.parents[0];
    auto& pg = self.parents[1];
    auto& pb = self.parents[2];
    for (int i = 0; i < t; ++i) {
      const double mean = (*stats)[2 * i], inv = (*stats)[2 * i + 1];
      const double* xi = px->value.data() + (size_t)i * d;
      const double* gi = self.grad.data() + (size_t)i * d;
      // xhat_j = (x_j - mean) * inv
      if (pg->requires_grad || pb->requires_grad) {
        for (int j = 0; j < d; ++j) {
          const double xhat = (xi[j] - mean) * inv;
          if (pg->requires_grad) pg->grad[j] += gi[j] * xhat;
          if (pb->requires_grad) pb->grad[j] += gi[j];
        }
      }
      if (px->requires_grad) {
        double sum_g = 0, sum_gx = 0;
        for (int j = 0; j < d; ++j) {
          const double gl = gi[j] * pg->value[j];
          const double xhat = (xi[j] - mean) * inv;
          sum_g += gl;
          sum_gx += gl * xhat;
        }
        double* gx = px->grad.data() + (size_t)i * d;
        for (int j = 0; j < d; ++j) {
          const double gl = gi[j] * pg->value[j];
          const double xhat = (xi[j] - mean) * inv;
          gx[j] += inv * (gl - sum_g / d - xhat * sum_gx / d);
        }
      }
    }
  });
}

Tensor softmax_rows(const Tensor& x) {
  const int t = x.rows(), d = x.cols();
  std::vector<double> out((size_t)t * d);
  for (int i = 0; i < t; ++i) {
    const double* xi = x.data().data() + (size_t)i * d;
    double* oi = out.data() + (size_t)i * d;
    const double m = kop().vmax(xi, d);
    double s = 0;
    for (int j = 0; j < d; ++j) {
      oi[j] = std::exp(xi[j] - m);
      s += oi[j];
    }
    const double inv = 1.0 / s;
    kop().scale(inv, oi, d);
  }
  return op_node(t, d, std::move(out), {x}, [t, d](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    for (int i = 0; i < t; ++i) {
      const double* s = self.value.data() + (size_t)i * d;
      const double* g = self.grad.data() + (size_t)i * d;
      const double gs = kop().dot(g, s, d);
      double* gx = p->grad.data() + (size_t)i * d;
      for (int j = 0; j < d; ++j) gx[j] += s[j] * (g[j] - gs);
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum_all(const Tensor& x) {
  double s = kop().sum(x.data().data(), x.numel());
  return op_node(1, 1, {s}, {x}, [](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    const double g = self.grad[0];
    for (auto& v : p->grad) v += g;
  });
}

Tensor mean_all(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.numel());
  double s = kop().sum(x.data().data(), x.numel()) * inv;
  return op_node(1, 1, {s}, {x}, [inv](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    const double g = self.grad[0] * inv;
    for (auto& v : p->grad) v += g;
  });
}

Tensor mean_rows(const Tensor& x) {
  const int t = x.rows(), d = x.cols();
  std::vector<double> out(d, 0.0);
  for (int i = 0; i < t; ++i) kop().axpy(1.0, x.data().data() + (size_t)i * d, out.data(), d);
  kop().scale(1.0 / t, out.data(), d);
  return op_node(1, d, std::move(out), {x}, [t, d](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    for (int i = 0; i < t; ++i)
      kop().axpy(1.0 / t, self.grad.data(), p->grad.data() + (size_t)i * d, d);
  });
}

// ---------------------------------------------------------------------------
// Structure

Tensor concat_rows(const std::vector<Tensor>& parts) {
  REVGEN_CHECK(!parts.empty(), "concat_rows: empty input");
  const int d = parts[0].cols();
  int t = 0;
  for (const auto& p : parts) {
    REVGEN_CHECK(p.cols() == d, "concat_rows: column mismatch");
    t += p.rows();
  }
  std::vector<double> out;
  out.reserve((size_t)t * d);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return op_node(t, d, std::move(out), parts, [d](TensorNode& self) {
    size_t off = 0;
    for (auto& p : self.parents) {
      const size_t n = p->value.size();
      if (p->requires_grad) kop().axpy(1.0, self.grad.data() + off, p->grad.data(), n);
      off += n;
    }
    (void)d;
  });
}

Tensor slice_rows(const Tensor& x, int r0, int r1) {
  REVGEN_CHECK(0 <= r0 && r0 < r1 && r1 <= x.rows(), "slice_rows: range out of bounds");
  const int d = x.cols(), t = r1 - r0;
  std::vector<double> out(x.data().begin() + (size_t)r0 * d, x.data().begin() + (size_t)r1 * d);
  return op_node(t, d, std::move(out), {x}, [r0, d](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    kop().axpy(1.0, self.grad.data(), p->grad.data() + (size_t)r0 * d, self.numel());
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  REVGEN_CHECK(!parts.empty(), "concat_cols: empty input");
  const int t = parts[0].rows();
  int d = 0;
  for (const auto& p : parts) {
    REVGEN_CHECK(p.rows() == t, "concat_cols: row mismatch");
    d += p.cols();
  }
  std::vector<double> out((size_t)t * d);
  int off = 0;
  for (const auto& p : parts) {
    const int pc = p.cols();
    for (int i = 0; i < t; ++i)
      std::copy_n(p.data().data() + (size_t)i * pc, pc, out.data() + (size_t)i * d + off);
    off += pc;
  }
  return op_node(t, d, std::move(out), parts, [t, d](TensorNode& self) {
    int off = 0;
    for (auto& p : self.parents) {
      const int pc = static_cast<int>(p->value.size()) / t;
      if (p->requires_grad) {
        for (int i = 0; i < t; ++i)
          kop().axpy(1.0, self.grad.data() + (size_t)i * d + off,
                     p->grad.data() + (size_t)i * pc, pc);
      }
      off += pc;
    }
  });
}

Tensor slice_cols(const Tensor& x, int c0, int c1) {
  REVGEN_CHECK(0 <= c0 && c0 < c1 && c1 <= x.cols(), "slice_cols: range out of bounds");
  const int t = x.rows(), d = x.cols(), w = c1 - c0;
  std::vector<double> out((size_t)t * w);
  for (int i = 0; i < t; ++i)
    std::copy_n(x.data().data() + (size_t)i * d + c0, w, out.data() + (size_t)i * w);
  return op_node(t, w, std::move(out), {x}, [t, d, c0, w](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    for (int i = 0; i < t; ++i)
      kop().axpy(1.0, self.grad.data() + (size_t)i * w, p->grad.data() + (size_t)i * d + c0, w);
  });
}

Tensor reshape(const Tensor& x, int rows, int cols) {
  REVGEN_CHECK((size_t)rows * cols == x.numel(), "reshape: element count mismatch");
  std::vector<double> out = x.data();
  return op_node(rows, cols, std::move(out), {x}, [](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    kop().axpy(1.0, self.grad.data(), p->grad.data(), self.numel());
  });
}

Tensor gather_map(const Tensor& x, std::shared_ptr<const std::vector<int64_t>> map, int rows,
                  int cols) {
  REVGEN_CHECK(map && map->size() == (size_t)rows * cols, "gather_map: map size mismatch");
  std::vector<double> out(map->size(), 0.0);
  const auto& xv = x.data();
  for (size_t i = 0; i < map->size(); ++i) {
    const int64_t j = (*map)[i];
    if (j >= 0) {
      REVGEN_CHECK((size_t)j < xv.size(), "gather_map: index out of range");
      out[i] = xv[j];
    }
  }
  return op_node(rows, cols, std::move(out), {x}, [map](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    for (size_t i = 0; i < map->size(); ++i) {
      const int64_t j = (*map)[i];
      if (j >= 0) p->grad[j] += self.grad[i];
    }
  });
}

Tensor detach(const Tensor& x) {
  return Tensor::from_data(x.rows(), x.cols(), x.data(), false);
}

// ---------------------------------------------------------------------------
// Row-wise small vector ops

Tensor rows_normalize(const Tensor& x, double eps) {
  const int t = x.rows(), d = x.cols();
  std::vector<double> out(x.numel());
  auto norms = std::make_shared<std::vector<double>>(t);
  for (int i = 0; i < t; ++i) {
    const double* xi = x.data().data() + (size_t)i * d;
    double n = std::sqrt(kop().dot(xi, xi, d) + eps);
    (*norms)[i] = n;
    for (int j = 0; j < d; ++j) out[(size_t)i * d + j] = xi[j] / n;
  }
  return op_node(t, d, std::move(out), {x}, [t, d, norms](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    for (int i = 0; i < t; ++i) {
      const double n = (*norms)[i];
      const double* y = self.value.data() + (size_t)i * d;
      const double* g = self.grad.data() + (size_t)i * d;
      const double gy = kop().dot(g, y, d);
      double* gx = p->grad.data() + (size_t)i * d;
      for (int j = 0; j < d; ++j) gx[j] += (g[j] - y[j] * gy) / n;
    }
  });
}

Tensor rows_dot(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "rows_dot");
  const int t = a.rows(), d = a.cols();
  std::vector<double> out(t);
  for (int i = 0; i < t; ++i)
    out[i] = kop().dot(a.data().data() + (size_t)i * d, b.data().data() + (size_t)i * d, d);
  return op_node(t, 1, std::move(out), {a, b}, [t, d](TensorNode& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    for (int i = 0; i < t; ++i) {
      const double g = self.grad[i];
      if (pa->requires_grad)
        kop().axpy(g, pb->value.data() + (size_t)i * d, pa->grad.data() + (size_t)i * d, d);
      if (pb->requires_grad)
        kop().axpy(g, pa->value.data() + (size_t)i * d, pb->grad.data() + (size_t)i * d, d);
    }
  });
}

Tensor rows_cross(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "rows_cross");
  REVGEN_CHECK(a.cols() == 3, "rows_cross: needs 3 columns");
  const int t = a.rows();
  std::vector<double> out((size_t)t * 3);
  for (int i = 0; i < t; ++i) {
    const double* u = a.data().data() + (size_t)i * 3;
    const double* v = b.data().data() + (size_t)i * 3;
    double* o = out.data() + (size_t)i * 3;
    o[0] = u[1] * v[2] - u[2] * v[1];
    o[1] = u[2] * v[0] - u[0] * v[2];
    o[2] = u[0] * v[1] - u[1] * v[0];
  }
  return op_node(t, 3, std::move(out), {a, b}, [t](TensorNode& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    for (int i = 0; i < t; ++i) {
      const double* u = pa->value.data() + (size_t)i * 3;
      const double* v = pb->value.data() + (size_t)i * 3;
      const double* g = self.grad.data() + (size_t)i * 3;
      if (pa->requires_grad) {
        double* gu = pa->grad.data() + (size_t)i * 3;
        gu[0] += v[1] * g[2] - v[2] * g[1];
        gu[1] += v[2] * g[0] - v[0] * g[2];
        gu[2] += v[0] * g[1] - v[1] * g[0];
      }
      if (pb->requires_grad) {
        double* gv = pb->grad.data() + (size_t)i * 3;
        gv[0] += u[2] * g[1] - u[1] * g[2];
        gv[1] += u[0] * g[2] - u[2] * g[0];
        gv[2] += u[1] * g[0] - u[0] * g[1];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Fixed-kernel convolution (SSIM windows)

Tensor conv2d_fixed(const Tensor& x, int h, int w, const std::vector<double>& kernel, int ksize) {
  REVGEN_CHECK(x.cols() == 1 && x.rows() == h * w, "conv2d_fixed: expects [H*W,1] input");
  REVGEN_CHECK((int)kernel.size() == ksize * ksize, "conv2d_fixed: kernel size mismatch");
  REVGEN_CHECK(h >= ksize && w >= ksize, "conv2d_fixed: image smaller than kernel");
  const int oh = h - ksize + 1, ow = w - ksize + 1;
  std::vector<double> out((size_t)oh * ow, 0.0);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      double s = 0;
      for (int ky = 0; ky < ksize; ++ky)
        s += kop().dot(kernel.data() + (size_t)ky * ksize,
                       x.data().data() + (size_t)(oy + ky) * w + ox, ksize);
      out[(size_t)oy * ow + ox] = s;
    }
  auto kern = std::make_shared<std::vector<double>>(kernel);
  return op_node(oh * ow, 1, std::move(out), {x},
                 [h, w, ksize, oh, ow, kern](TensorNode& self) {
                   auto& p = self.parents[0];
                   if (!p->requires_grad) return;
                   for (int oy = 0; oy < oh; ++oy)
                     for (int ox = 0; ox < ow; ++ox) {
                       const double g = self.grad[(size_t)oy * ow + ox];
                       if (g == 0.0) continue;
                       for (int ky = 0; ky < ksize; ++ky)
                         kop().axpy(g, kern->data() + (size_t)ky * ksize,
                                    p->grad.data() + (size_t)(oy + ky) * w + ox, ksize);
                     }
                   (void)h;
                 });
}

std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                      const std::vector<double>& x, double h) {
  std::vector<double> g(x.size());
  std::vector<double> probe = x;
  for (size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

}  // namespace revgen
