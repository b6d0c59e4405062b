// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic labelled random streams. Every stochastic draw in the project
// comes from an RngStream derived from (seed, label), so a run is fully
// replayable from its config. Implementation is xoshiro256++ seeded through
// splitmix64 from a hash of the pair; no std::random_device, no libstdc++
// distribution dependence.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace revgen {

class RngStream {
 public:
  RngStream(uint64_t seed, const std::string& label);

  uint64_t next_u64();
  // Uniform in [0,1).
  double uniform();
  double uniform(double lo, double hi);
  // i in [0, n)
  uint64_t uniform_index(uint64_t n);
  // Standard normal, Box-Muller with cached spare.
  double normal();
  std::vector<double> normal_vec(size_t n);

  // Child stream with a derived label ("label/sub").
  RngStream fork(const std::string& sub) const;

  const std::string& label() const { return label_; }
  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::string label_;
  uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// FNV-1a, used for label hashing and content checksums.
uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ull);
uint64_t fnv1a(const std::string& s);

}  // namespace revgen
