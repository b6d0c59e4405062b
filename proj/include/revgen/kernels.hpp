// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Dispatchable dense math kernels. Every kernel has a scalar reference
// implementation plus optional AVX2 / AVX-512 / NEON variants; the fastest
// supported variant is selected once at startup via cpuid. All higher-level
// tensor math funnels through this table, so SIMD/scalar equivalence tests
// over these entry points cover the whole numeric stack.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace revgen::kernels {

// Matrix operands are dense row-major doubles. `acc` selects C += AB vs C = AB.
struct Ops {
  const char* name;

  // C[m,n] = A[m,k] * B[k,n]
  void (*gemm_nn)(const double* a, const double* b, double* c, int m, int n, int k, bool acc);
  // C[m,n] = A[m,k] * B[n,k]^T   (dot products of rows)
  void (*gemm_nt)(const double* a, const double* b, double* c, int m, int n, int k, bool acc);
  // C[k,n] = A[m,k]^T * B[m,n]
  void (*gemm_tn)(const double* a, const double* b, double* c, int m, int n, int k, bool acc);

  void (*vadd)(const double* x, const double* y, double* out, size_t n);
  void (*vsub)(const double* x, const double* y, double* out, size_t n);
  void (*vmul)(const double* x, const double* y, double* out, size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, size_t n);
  void (*scale)(double a, double* x, size_t n);
  double (*dot)(const double* x, const double* y, size_t n);
  double (*sum)(const double* x, size_t n);
  double (*vmax)(const double* x, size_t n);
};

// Active table (best ISA supported by this CPU, or the forced one).
const Ops& active();

// All tables usable on this CPU, scalar first. For equivalence tests.
std::vector<const Ops*> available();

// Force a specific variant by name ("scalar", "avx2", "avx512", "neon").
// Throws if the variant is unavailable on this machine.
void force(const std::string& name);
void reset_dispatch();

extern const Ops scalar_ops;
#if defined(REVGEN_X86)
// Defined in their ISA-specific translation units; dispatch does the cpuid
// checks before touching these.
const Ops* avx2_table_ptr();
const Ops* avx512_table_ptr();
#endif
#if defined(REVGEN_NEON)
const Ops* neon_table_ptr();
#endif

}  // namespace revgen::kernels
