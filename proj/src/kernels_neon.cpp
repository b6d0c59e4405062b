// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// NEON kernels (2 doubles per vector) for aarch64.

#include "revgen/kernels.hpp"

#if defined(REVGEN_NEON)

#include <arm_neon.h>

#include <algorithm>

namespace revgen::kernels {
namespace {

void gemm_nn_neon(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  const int n2 = n & ~1;
  for (int i = 0; i < m; ++i) {
    double* crow = c + (size_t)i * n;
    if (!acc) std::fill(crow, crow + n, 0.0);
    const double* arow = a + (size_t)i * k;
    for (int p = 0; p < k; ++p) {
      const float64x2_t av = vdupq_n_f64(arow[p]);
      const double* brow = b + (size_t)p * n;
      int j = 0;
      for (; j < n2; j += 2)
        vst1q_f64(crow + j, vfmaq_f64(vld1q_f64(crow + j), av, vld1q_f64(brow + j)));
      for (; j < n; ++j) crow[j] += arow[p] * brow[j];
    }
  }
}

void gemm_nt_neon(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  const int k2 = k & ~1;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + (size_t)i * k;
    double* crow = c + (size_t)i * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + (size_t)j * k;
      float64x2_t accv = vdupq_n_f64(0.0);
      int p = 0;
      for (; p < k2; p += 2) accv = vfmaq_f64(accv, vld1q_f64(arow + p), vld1q_f64(brow + p));
      double s = vaddvq_f64(accv);
      for (; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = acc ? crow[j] + s : s;
    }
  }
}

void gemm_tn_neon(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  if (!acc) std::fill(c, c + (size_t)k * n, 0.0);
  const int n2 = n & ~1;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + (size_t)i * k;
    const double* brow = b + (size_t)i * n;
    for (int p = 0; p < k; ++p) {
      const float64x2_t av = vdupq_n_f64(arow[p]);
      double* crow = c + (size_t)p * n;
      int j = 0;
      for (; j < n2; j += 2)
        vst1q_f64(crow + j, vfmaq_f64(vld1q_f64(crow + j), av, vld1q_f64(brow + j)));
      for (; j < n; ++j) crow[j] += arow[p] * brow[j];
    }
  }
}

void vadd_neon(const double* x, const double* y, double* out, size_t n) {
  size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vaddq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}
void vsub_neon(const double* x, const double* y, double* out, size_t n) {
  size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] - y[i];
}
void vmul_neon(const double* x, const double* y, double* out, size_t n) {
  size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}
void axpy_neon(double a, const double* x, double* y, size_t n) {
  const float64x2_t av = vdupq_n_f64(a);
  size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), av, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}
void scale_neon(double a, double* x, size_t n) {
  const float64x2_t av = vdupq_n_f64(a);
  size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(av, vld1q_f64(x + i)));
  for (; i < n; ++i) x[i] *= a;
}
double dot_neon(const double* x, const double* y, size_t n) {
  float64x2_t accv = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 2 <= n; i += 2) accv = vfmaq_f64(accv, vld1q_f64(x + i), vld1q_f64(y + i));
  double s = vaddvq_f64(accv);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}
double sum_neon(const double* x, size_t n) {
  float64x2_t accv = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 2 <= n; i += 2) accv = vaddq_f64(accv, vld1q_f64(x + i));
  double s = vaddvq_f64(accv);
  for (; i < n; ++i) s += x[i];
  return s;
}
double vmax_neon(const double* x, size_t n) {
  double m = x[0];
  for (size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

const Ops neon_table = {
    "neon",    gemm_nn_neon, gemm_nt_neon, gemm_tn_neon, vadd_neon, vsub_neon,
    vmul_neon, axpy_neon,    scale_neon,   dot_neon,     sum_neon,  vmax_neon,
};

}  // namespace

const Ops* neon_table_ptr() { return &neon_table; }

}  // namespace revgen::kernels

#endif  // REVGEN_NEON
