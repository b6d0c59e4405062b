// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "revgen/common.hpp"

namespace revgen {

namespace {

// Payload is little-endian on disk regardless of host order.
inline uint32_t to_le(uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return __builtin_bswap32(v);
}

}  // namespace

size_t Array::numel() const {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  return n;
}

Array Array::zeros(std::vector<int> shape) {
  Array a;
  a.shape = std::move(shape);
  a.data.assign(a.numel(), 0.0);
  return a;
}

void save_tensor(const std::string& path, const Array& a) {
  for (int d : a.shape) REVGEN_CHECK(d >= 0, "save_tensor: negative axis in shape");
  REVGEN_CHECK(a.data.size() == a.numel(), "save_tensor: data/shape mismatch");
  for (double v : a.data)
    REVGEN_CHECK(std::isfinite(v), "save_tensor: non-finite value in '" + path + "'");

  std::ofstream f(path, std::ios::binary);
  REVGEN_CHECK(f.good(), "save_tensor: cannot open '" + path + "' for writing");
  f << "REVT f32 " << a.shape.size();
  for (int d : a.shape) f << ' ' << d;
  f << '\n';
  std::vector<uint32_t> buf(a.data.size());
  for (size_t i = 0; i < a.data.size(); ++i) {
    float x = static_cast<float>(a.data[i]);
    uint32_t bits;
    std::memcpy(&bits, &x, 4);
    buf[i] = to_le(bits);
  }
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  REVGEN_CHECK(f.good(), "save_tensor: write failed for '" + path + "'");
}

Array load_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REVGEN_CHECK(f.good(), "load_tensor: cannot open '" + path + "'");
  std::string line;
  REVGEN_CHECK(static_cast<bool>(std::getline(f, line)), "load_tensor: missing header in '" + path + "'");
  std::istringstream hs(line);
  std::string magic, dtype;
  hs >> magic >> dtype;
  REVGEN_CHECK(magic == "REVT", "load_tensor: bad magic field in '" + path + "'");
  REVGEN_CHECK(dtype == "f32", "load_tensor: unsupported dtype field '" + dtype + "' in '" + path + "'");
  size_t ndim = 0;
  REVGEN_CHECK(static_cast<bool>(hs >> ndim), "load_tensor: missing ndim field in '" + path + "'");
  REVGEN_CHECK(ndim <= 8, "load_tensor: ndim field out of range in '" + path + "'");
  Array a;
  a.shape.resize(ndim);
  size_t n = 1;
  for (size_t i = 0; i < ndim; ++i) {
    long long d = -1;
    REVGEN_CHECK(static_cast<bool>(hs >> d) && d >= 0,
                 "load_tensor: bad shape field in '" + path + "'");
    a.shape[i] = static_cast<int>(d);
    n *= static_cast<size_t>(d);
  }
  std::vector<uint32_t> buf(n);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4));
  REVGEN_CHECK(static_cast<size_t>(f.gcount()) == n * 4,
               "load_tensor: payload shorter than declared shape in '" + path + "'");
  char extra;
  REVGEN_CHECK(!f.get(extra), "load_tensor: payload longer than declared shape in '" + path + "'");
  a.data.resize(n);
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits = to_le(buf[i]);
    float x;
    std::memcpy(&x, &bits, 4);
    a.data[i] = static_cast<double>(x);
  }
  return a;
}

}  // namespace revgen
