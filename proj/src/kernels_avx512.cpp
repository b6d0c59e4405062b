// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// AVX-512 kernels (8 doubles per vector).

#include "revgen/kernels.hpp"

#if defined(REVGEN_X86)

#include <immintrin.h>

#include <algorithm>

namespace revgen::kernels {
namespace {

void gemm_nn_avx512(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  const int n8 = n & ~7;
  for (int i = 0; i < m; ++i) {
    double* crow = c + (size_t)i * n;
    if (!acc) std::fill(crow, crow + n, 0.0);
    const double* arow = a + (size_t)i * k;
    int p = 0;
    // Two k-steps per pass keeps the FMA ports busier.
    for (; p + 2 <= k; p += 2) {
      const __m512d a0 = _mm512_set1_pd(arow[p]);
      const __m512d a1 = _mm512_set1_pd(arow[p + 1]);
      const double* b0 = b + (size_t)p * n;
      const double* b1 = b + (size_t)(p + 1) * n;
      int j = 0;
      for (; j < n8; j += 8) {
        __m512d cv = _mm512_loadu_pd(crow + j);
        cv = _mm512_fmadd_pd(a0, _mm512_loadu_pd(b0 + j), cv);
        cv = _mm512_fmadd_pd(a1, _mm512_loadu_pd(b1 + j), cv);
        _mm512_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += arow[p] * b0[j] + arow[p + 1] * b1[j];
    }
    for (; p < k; ++p) {
      const __m512d av = _mm512_set1_pd(arow[p]);
      const double* brow = b + (size_t)p * n;
      int j = 0;
      for (; j < n8; j += 8) {
        __m512d cv = _mm512_loadu_pd(crow + j);
        cv = _mm512_fmadd_pd(av, _mm512_loadu_pd(brow + j), cv);
        _mm512_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += arow[p] * brow[j];
    }
  }
}

void gemm_nt_avx512(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  const int k8 = k & ~7;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + (size_t)i * k;
    double* crow = c + (size_t)i * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + (size_t)j * k;
      __m512d accv = _mm512_setzero_pd();
      int p = 0;
      for (; p < k8; p += 8)
        accv = _mm512_fmadd_pd(_mm512_loadu_pd(arow + p), _mm512_loadu_pd(brow + p), accv);
      double s = _mm512_reduce_add_pd(accv);
      for (; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = acc ? crow[j] + s : s;
    }
  }
}

void gemm_tn_avx512(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  if (!acc) std::fill(c, c + (size_t)k * n, 0.0);
  const int n8 = n & ~7;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + (size_t)i * k;
    const double* brow = b + (size_t)i * n;
    for (int p = 0; p < k; ++p) {
      const __m512d av = _mm512_set1_pd(arow[p]);
      double* crow = c + (size_t)p * n;
      int j = 0;
      for (; j < n8; j += 8) {
        __m512d cv = _mm512_loadu_pd(crow + j);
        cv = _mm512_fmadd_pd(av, _mm512_loadu_pd(brow + j), cv);
        _mm512_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += arow[p] * brow[j];
    }
  }
}

void vadd_avx512(const double* x, const double* y, double* out, size_t n) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm512_storeu_pd(out + i, _mm512_add_pd(_mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}
void vsub_avx512(const double* x, const double* y, double* out, size_t n) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm512_storeu_pd(out + i, _mm512_sub_pd(_mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] - y[i];
}
void vmul_avx512(const double* x, const double* y, double* out, size_t n) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm512_storeu_pd(out + i, _mm512_mul_pd(_mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}
void axpy_avx512(double a, const double* x, double* y, size_t n) {
  const __m512d av = _mm512_set1_pd(a);
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm512_storeu_pd(y + i, _mm512_fmadd_pd(av, _mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}
void scale_avx512(double a, double* x, size_t n) {
  const __m512d av = _mm512_set1_pd(a);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm512_storeu_pd(x + i, _mm512_mul_pd(av, _mm512_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}
double dot_avx512(const double* x, const double* y, size_t n) {
  __m512d accv = _mm512_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    accv = _mm512_fmadd_pd(_mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i), accv);
  double s = _mm512_reduce_add_pd(accv);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}
double sum_avx512(const double* x, size_t n) {
  __m512d accv = _mm512_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) accv = _mm512_add_pd(accv, _mm512_loadu_pd(x + i));
  double s = _mm512_reduce_add_pd(accv);
  for (; i < n; ++i) s += x[i];
  return s;
}
double vmax_avx512(const double* x, size_t n) {
  if (n < 16) {
    double m = x[0];
    for (size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
    return m;
  }
  __m512d mv = _mm512_loadu_pd(x);
  size_t i = 8;
  for (; i + 8 <= n; i += 8) mv = _mm512_max_pd(mv, _mm512_loadu_pd(x + i));
  double m = _mm512_reduce_max_pd(mv);
  for (; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

const Ops avx512_table = {
    "avx512",    gemm_nn_avx512, gemm_nt_avx512, gemm_tn_avx512, vadd_avx512, vsub_avx512,
    vmul_avx512, axpy_avx512,    scale_avx512,   dot_avx512,     sum_avx512,  vmax_avx512,
};

}  // namespace

const Ops* avx512_table_ptr() { return &avx512_table; }

}  // namespace revgen::kernels

#endif  // REVGEN_X86
