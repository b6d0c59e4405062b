// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// AVX2+FMA kernels (4 doubles per vector). Compiled with -mavx2 -mfma only in
// this translation unit; callers reach these through the dispatch table.

#include "revgen/kernels.hpp"

#if defined(REVGEN_X86)

#include <immintrin.h>

#include <algorithm>

namespace revgen::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void gemm_nn_avx2(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  const int n4 = n & ~3;
  for (int i = 0; i < m; ++i) {
    double* crow = c + (size_t)i * n;
    if (!acc) std::fill(crow, crow + n, 0.0);
    const double* arow = a + (size_t)i * k;
    for (int p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(arow[p]);
      const double* brow = b + (size_t)p * n;
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += arow[p] * brow[j];
    }
  }
}

void gemm_nt_avx2(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  const int k4 = k & ~3;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + (size_t)i * k;
    double* crow = c + (size_t)i * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + (size_t)j * k;
      __m256d accv = _mm256_setzero_pd();
      int p = 0;
      for (; p < k4; p += 4)
        accv = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p), _mm256_loadu_pd(brow + p), accv);
      double s = hsum(accv);
      for (; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = acc ? crow[j] + s : s;
    }
  }
}

void gemm_tn_avx2(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  if (!acc) std::fill(c, c + (size_t)k * n, 0.0);
  const int n4 = n & ~3;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + (size_t)i * k;
    const double* brow = b + (size_t)i * n;
    for (int p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(arow[p]);
      double* crow = c + (size_t)p * n;
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += arow[p] * brow[j];
    }
  }
}

void vadd_avx2(const double* x, const double* y, double* out, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}
void vsub_avx2(const double* x, const double* y, double* out, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] - y[i];
}
void vmul_avx2(const double* x, const double* y, double* out, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}
void axpy_avx2(double a, const double* x, double* y, size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}
void scale_avx2(double a, double* x, size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}
double dot_avx2(const double* x, const double* y, size_t n) {
  __m256d accv = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    accv = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), accv);
  double s = hsum(accv);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}
double sum_avx2(const double* x, size_t n) {
  __m256d accv = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) accv = _mm256_add_pd(accv, _mm256_loadu_pd(x + i));
  double s = hsum(accv);
  for (; i < n; ++i) s += x[i];
  return s;
}
double vmax_avx2(const double* x, size_t n) {
  if (n < 8) {
    double m = x[0];
    for (size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
    return m;
  }
  __m256d mv = _mm256_loadu_pd(x);
  size_t i = 4;
  for (; i + 4 <= n; i += 4) mv = _mm256_max_pd(mv, _mm256_loadu_pd(x + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, mv);
  double m = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
  for (; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

const Ops avx2_table = {
    "avx2",    gemm_nn_avx2, gemm_nt_avx2, gemm_tn_avx2, vadd_avx2, vsub_avx2,
    vmul_avx2, axpy_avx2,    scale_avx2,   dot_avx2,     sum_avx2,  vmax_avx2,
};

}  // namespace

const Ops* avx2_table_ptr() { return &avx2_table; }

}  // namespace revgen::kernels

#endif  // REVGEN_X86
