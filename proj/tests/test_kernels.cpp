// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// SIMD variants must agree with the scalar reference on every entry point.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "revgen/kernels.hpp"
#include "revgen/rng.hpp"

using namespace revgen;

namespace {

std::vector<double> random_vec(size_t n, RngStream& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    CHECK(std::abs(a[i] - b[i]) / scale < tol);
  }
}

}  // namespace

TEST_CASE("dispatch reports at least the scalar table") {
  auto tables = kernels::available();
  REQUIRE(!tables.empty());
  CHECK(std::string(tables[0]->name) == "scalar");
  CHECK(std::string(kernels::active().name) == std::string(tables.back()->name));
}

TEST_CASE("gemm variants match scalar reference") {
  RngStream rng(7, "kernels/gemm");
  const auto& ref = kernels::scalar_ops;
  for (auto [m, n, k] : {std::tuple{3, 5, 4}, {16, 16, 16}, {33, 7, 129}, {1, 64, 9}, {8, 1, 3}}) {
    auto a = random_vec((size_t)m * k, rng);
    auto b_nn = random_vec((size_t)k * n, rng);
    auto b_nt = random_vec((size_t)n * k, rng);
    auto b_tn = random_vec((size_t)m * n, rng);
    auto seed_c = random_vec((size_t)m * n, rng);
    auto seed_tn = random_vec((size_t)k * n, rng);

    for (bool acc : {false, true}) {
      std::vector<double> want_nn = acc ? seed_c : std::vector<double>((size_t)m * n);
      ref.gemm_nn(a.data(), b_nn.data(), want_nn.data(), m, n, k, acc);
      std::vector<double> want_nt = acc ? seed_c : std::vector<double>((size_t)m * n);
      ref.gemm_nt(a.data(), b_nt.data(), want_nt.data(), m, n, k, acc);
      std::vector<double> want_tn = acc ? seed_tn : std::vector<double>((size_t)k * n);
      ref.gemm_tn(a.data(), b_tn.data(), want_tn.data(), m, n, k, acc);

      for (const auto* ops : kernels::available()) {
        std::vector<double> got_nn = acc ? seed_c : std::vector<double>((size_t)m * n);
        ops->gemm_nn(a.data(), b_nn.data(), got_nn.data(), m, n, k, acc);
        check_close(got_nn, want_nn, 1e-11);
        std::vector<double> got_nt = acc ? seed_c : std::vector<double>((size_t)m * n);
        ops->gemm_nt(a.data(), b_nt.data(), got_nt.data(), m, n, k, acc);
        check_close(got_nt, want_nt, 1e-11);
        std::vector<double> got_tn = acc ? seed_tn : std::vector<double>((size_t)k * n);
        ops->gemm_tn(a.data(), b_tn.data(), got_tn.data(), m, n, k, acc);
        check_close(got_tn, want_tn, 1e-11);
      }
    }
  }
}

TEST_CASE("vector ops match scalar reference") {
  RngStream rng(11, "kernels/vec");
  for (size_t n : {1ul, 2ul, 7ul, 8ul, 64ul, 1001ul}) {
    auto x = random_vec(n, rng);
    auto y = random_vec(n, rng);
    const auto& ref = kernels::scalar_ops;

    std::vector<double> want(n);
    for (const auto* ops : kernels::available()) {
      std::vector<double> got(n);
      ref.vadd(x.data(), y.data(), want.data(), n);
      ops->vadd(x.data(), y.data(), got.data(), n);
      check_close(got, want, 1e-14);
      ref.vsub(x.data(), y.data(), want.data(), n);
      ops->vsub(x.data(), y.data(), got.data(), n);
      check_close(got, want, 1e-14);
      ref.vmul(x.data(), y.data(), want.data(), n);
      ops->vmul(x.data(), y.data(), got.data(), n);
      check_close(got, want, 1e-14);

      std::vector<double> wy = y, gy = y;
      ref.axpy(0.37, x.data(), wy.data(), n);
      ops->axpy(0.37, x.data(), gy.data(), n);
      check_close(gy, wy, 1e-13);

      std::vector<double> wx = x, gx = x;
      ref.scale(-1.7, wx.data(), n);
      ops->scale(-1.7, gx.data(), n);
      check_close(gx, wx, 1e-14);

      CHECK(std::abs(ops->dot(x.data(), y.data(), n) - ref.dot(x.data(), y.data(), n)) <
            1e-10 * (1.0 + std::abs(ref.dot(x.data(), y.data(), n))));
      CHECK(std::abs(ops->sum(x.data(), n) - ref.sum(x.data(), n)) <
            1e-10 * (1.0 + std::abs(ref.sum(x.data(), n))));
      CHECK(ops->vmax(x.data(), n) == ref.vmax(x.data(), n));
    }
  }
}

TEST_CASE("force() switches the active table and rejects unknown names") {
  for (const auto* ops : kernels::available()) {
    kernels::force(ops->name);
    CHECK(std::string(kernels::active().name) == ops->name);
  }
  CHECK_THROWS(kernels::force("not-a-variant"));
  kernels::reset_dispatch();
}
