// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference kernels. Plain loops, fixed accumulation order; the SIMD variants
// are tested against these.

#include "revgen/kernels.hpp"

#include <algorithm>

namespace revgen::kernels {
namespace {

void gemm_nn_scalar(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + (size_t)i * n;
    if (!acc) std::fill(crow, crow + n, 0.0);
    const double* arow = a + (size_t)i * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + (size_t)p * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt_scalar(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + (size_t)i * k;
    double* crow = c + (size_t)i * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + (size_t)j * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = acc ? crow[j] + s : s;
    }
  }
}

void gemm_tn_scalar(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  if (!acc) std::fill(c, c + (size_t)k * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* arow = a + (size_t)i * k;
    const double* brow = b + (size_t)i * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      double* crow = c + (size_t)p * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void vadd_scalar(const double* x, const double* y, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}
void vsub_scalar(const double* x, const double* y, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = x[i] - y[i];
}
void vmul_scalar(const double* x, const double* y, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}
void axpy_scalar(double a, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}
void scale_scalar(double a, double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] *= a;
}
double dot_scalar(const double* x, const double* y, size_t n) {
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}
double sum_scalar(const double* x, size_t n) {
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += x[i];
  return s;
}
double vmax_scalar(const double* x, size_t n) {
  double m = x[0];
  for (size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

}  // namespace

const Ops scalar_ops = {
    "scalar",    gemm_nn_scalar, gemm_nt_scalar, gemm_tn_scalar, vadd_scalar, vsub_scalar,
    vmul_scalar, axpy_scalar,    scale_scalar,   dot_scalar,     sum_scalar,  vmax_scalar,
};

}  // namespace revgen::kernels
