// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat tensor file format: one ASCII header line
//     REVT f32 <ndim> <d0> <d1> ...\n
// followed by the payload as little-endian float32. Text header keeps files
// diffable; payload round-trips bit-exactly.

#pragma once

#include <string>
#include <vector>

namespace revgen {

struct Array {
  std::vector<int> shape;
  std::vector<double> data;  // held as double in memory, stored as f32

  size_t numel() const;
  static Array zeros(std::vector<int> shape);
};

void save_tensor(const std::string& path, const Array& a);
Array load_tensor(const std::string& path);

}  // namespace revgen
