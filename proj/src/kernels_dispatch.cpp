// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/kernels.hpp"

#include <stdexcept>

#if defined(REVGEN_X86)
#include <cpuid.h>
#endif

namespace revgen::kernels {
namespace {

#if defined(REVGEN_X86)
bool cpu_has(unsigned leaf, unsigned subleaf, int reg, unsigned bit) {
  unsigned eax = 0, ebx = 0, ecx = 0, edx = 0;
  if (!__get_cpuid_count(leaf, subleaf, &eax, &ebx, &ecx, &edx)) return false;
  unsigned regs[4] = {eax, ebx, ecx, edx};
  return (regs[reg] >> bit) & 1u;
}

bool has_avx2_fma() {
  // AVX2: leaf 7 EBX bit 5; FMA: leaf 1 ECX bit 12.
  return cpu_has(7, 0, 1, 5) && cpu_has(1, 0, 2, 12);
}
bool has_avx512() {
  // AVX512F: leaf 7 EBX bit 16; AVX512DQ: bit 17.
  return cpu_has(7, 0, 1, 16) && cpu_has(7, 0, 1, 17);
}
#endif

std::vector<const Ops*> probe() {
  std::vector<const Ops*> tables;
  tables.push_back(&scalar_ops);
#if defined(REVGEN_X86)
  if (has_avx2_fma()) tables.push_back(avx2_table_ptr());
  if (has_avx512()) tables.push_back(avx512_table_ptr());
#endif
#if defined(REVGEN_NEON)
  tables.push_back(neon_table_ptr());
#endif
  return tables;
}

const Ops* g_active = nullptr;

const Ops* best() {
  auto tables = probe();
  return tables.back();
}

}  // namespace

const Ops& active() {
  if (!g_active) g_active = best();
  return *g_active;
}

std::vector<const Ops*> available() { return probe(); }

void force(const std::string& name) {
  for (const Ops* t : probe()) {
    if (name == t->name) {
      g_active = t;
      return;
    }
  }
  throw std::runtime_error("kernels: variant '" + name + "' not available on this CPU");
}

void reset_dispatch() { g_active = nullptr; }

}  // namespace revgen::kernels
