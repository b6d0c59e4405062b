// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Autodiff gradients are checked against central finite differences for every
// op family; the engine runs in double so 1e-6 agreement is expected.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "revgen/nn.hpp"
#include "revgen/rng.hpp"
#include "revgen/tensor.hpp"

using namespace revgen;

namespace {

// Checks d(scalar_fn)/dx against finite differences at x0.
void check_grad(int rows, int cols,
                const std::function<Tensor(const Tensor&)>& scalar_fn, uint64_t seed,
                double tol = 1e-6, double h = 1e-5) {
  RngStream rng(seed, "gradcheck");
  Tensor x = Tensor::randn(rows, cols, rng, 1.0, true);
  Tensor y = scalar_fn(x);
  REQUIRE(y.numel() == 1);
  y.backward();
  const std::vector<double> analytic = x.grad();

  auto f = [&](const std::vector<double>& v) {
    Tensor xt = Tensor::from_data(rows, cols, v, false);
    return scalar_fn(xt).item();
  };
  const std::vector<double> fd = finite_difference(f, x.data(), h);
  double num = 0, den = 0;
  for (size_t i = 0; i < fd.size(); ++i) {
    num += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
    den += fd[i] * fd[i];
  }
  CHECK(std::sqrt(num) <= tol * (std::sqrt(den) + 1e-12));
}

}  // namespace

TEST_CASE("elementwise and reduction gradients") {
  RngStream rng(1, "consts");
  Tensor c = Tensor::randn(3, 4, rng);
  check_grad(3, 4, [&](const Tensor& x) { return sum_all(mul(x, c)); }, 11);
  check_grad(3, 4, [&](const Tensor& x) { return mean_all(mul(x, x)); }, 12);
  check_grad(3, 4, [&](const Tensor& x) { return sum_all(div(c, add_scalar(mul(x, x), 2.0))); },
             13);
  check_grad(3, 4, [&](const Tensor& x) { return sum_all(abs_t(x)); }, 14, 1e-5);
  check_grad(2, 5, [&](const Tensor& x) { return mean_all(silu(x)); }, 15);
  check_grad(2, 5, [&](const Tensor& x) { return mean_all(sigmoid(scale(x, 1.3))); }, 16);
  check_grad(4, 1, [&](const Tensor& x) { return sum_all(acos_clamped(sigmoid(x))); }, 17, 1e-5);
  check_grad(1, 6, [&](const Tensor& x) { return sum_all(mul(mean_rows(x), mean_rows(x))); }, 18);
}

TEST_CASE("matmul gradients") {
  RngStream rng(2, "consts");
  Tensor a = Tensor::randn(4, 3, rng);
  Tensor b = Tensor::randn(3, 5, rng);
  Tensor bt = Tensor::randn(5, 3, rng);
  check_grad(3, 5, [&](const Tensor& x) { return sum_all(mul(matmul(a, x), matmul(a, x))); }, 21);
  check_grad(4, 3, [&](const Tensor& x) { return mean_all(matmul(x, b)); }, 22);
  check_grad(4, 3, [&](const Tensor& x) { return sum_all(mul(matmul_nt(x, bt), matmul_nt(x, bt))); },
             23);
  check_grad(5, 3, [&](const Tensor& x) { return mean_all(matmul_nt(a, x)); }, 24);
}

TEST_CASE("softmax, layernorm, bias gradients") {
  RngStream rng(3, "consts");
  Tensor c = Tensor::randn(4, 6, rng);
  check_grad(4, 6, [&](const Tensor& x) { return sum_all(mul(softmax_rows(x), c)); }, 31, 1e-6);
  Tensor gamma = Tensor::randn(1, 6, rng);
  Tensor beta = Tensor::randn(1, 6, rng);
  check_grad(4, 6,
             [&](const Tensor& x) { return sum_all(mul(layer_norm(x, gamma, beta), c)); }, 32,
             1e-5);
  check_grad(1, 6, [&](const Tensor& g) {
    Tensor x = slice_rows(c, 0, 3);
    return sum_all(mul(layer_norm(x, g, beta), slice_rows(c, 1, 4)));
  }, 33, 1e-5);
  Tensor bias = Tensor::randn(1, 6, rng);
  check_grad(4, 6, [&](const Tensor& x) { return mean_all(add_bias(x, bias)); }, 34);
  check_grad(1, 6, [&](const Tensor& b) { return mean_all(mul(add_bias(c, b), c)); }, 35);
}

TEST_CASE("structure op gradients") {
  RngStream rng(4, "consts");
  Tensor c = Tensor::randn(6, 4, rng);
  check_grad(3, 4, [&](const Tensor& x) {
    return sum_all(mul(concat_rows({x, x}), slice_rows(c, 0, 6)));
  }, 41);
  check_grad(6, 2, [&](const Tensor& x) {
    return sum_all(mul(concat_cols({x, slice_cols(c, 0, 2)}), c));
  }, 42);
  check_grad(4, 4, [&](const Tensor& x) { return sum_all(mul(slice_cols(x, 1, 3), slice_cols(x, 0, 2))); },
             43);
  check_grad(3, 4, [&](const Tensor& x) { return mean_all(reshape(x, 4, 3)); }, 44);
  check_grad(4, 2, [&](const Tensor& x) {
    Tensor w = slice_cols(c, 0, 1);
    return sum_all(mul_bcast_col(x, slice_rows(w, 0, 4)));
  }, 45);

  auto map = std::make_shared<std::vector<int64_t>>(std::vector<int64_t>{3, -1, 0, 2, -1, 1});
  check_grad(2, 2, [&](const Tensor& x) {
    return sum_all(mul(gather_map(x, map, 6, 1), slice_rows(reshape(c, 24, 1), 0, 6)));
  }, 46);
}

TEST_CASE("rows ops gradients") {
  RngStream rng(5, "consts");
  Tensor c3 = Tensor::randn(5, 3, rng);
  Tensor d3 = Tensor::randn(5, 3, rng);
  check_grad(5, 3, [&](const Tensor& x) { return sum_all(mul(rows_normalize(x), c3)); }, 51, 1e-5);
  check_grad(5, 3, [&](const Tensor& x) { return sum_all(rows_dot(x, c3)); }, 52);
  check_grad(5, 3, [&](const Tensor& x) { return sum_all(mul(rows_cross(x, c3), d3)); }, 53);
  check_grad(5, 3, [&](const Tensor& x) { return sum_all(rows_dot(x, x)); }, 54);
}

TEST_CASE("conv2d_fixed gradient and value") {
  std::vector<double> kernel(9, 1.0 / 9.0);
  RngStream rng(6, "conv");
  Tensor img = Tensor::randn(5 * 6, 1, rng, 1.0, false);
  Tensor out = conv2d_fixed(img, 5, 6, kernel, 3);
  REQUIRE(out.rows() == 3 * 4);
  // Box filter: value equals local mean.
  double manual = 0;
  for (int ky = 0; ky < 3; ++ky)
    for (int kx = 0; kx < 3; ++kx) manual += img.data()[(1 + ky) * 6 + (2 + kx)];
  manual /= 9.0;
  CHECK(out.data()[1 * 4 + 2] == doctest::Approx(manual));

  Tensor cc = Tensor::randn(12, 1, rng);
  check_grad(30, 1, [&](const Tensor& x) { return sum_all(mul(conv2d_fixed(x, 5, 6, kernel, 3), cc)); },
             61);
}

TEST_CASE("linear, mlp and attention gradcheck through ParamStore") {
  RngStream rng(7, "nn");
  ParamStore ps;
  Linear lin = Linear::make(ps, "lin", 4, 3, rng);
  Tensor target = Tensor::randn(5, 3, rng);
  check_grad(5, 4, [&](const Tensor& x) {
    Tensor d = sub(lin.forward(x), target);
    return mean_all(mul(d, d));
  }, 71);

  MultiHeadAttention mha = MultiHeadAttention::make(ps, "mha", 4, 6, 2, rng);
  Tensor kv = Tensor::randn(7, 6, rng);
  check_grad(5, 4, [&](const Tensor& x) { return mean_all(mha.forward(x, kv)); }, 72, 1e-5);
  // Gradients also flow into parameters.
  Tensor x = Tensor::randn(5, 4, rng, 1.0, true);
  Tensor loss = mean_all(mha.forward(x, kv));
  loss.backward();
  double gsum = 0;
  for (const auto& p : ps.trainable())
    if (!p.grad().empty())
      for (double g : p.grad()) gsum += std::abs(g);
  CHECK(gsum > 0);
}

TEST_CASE("adamw reduces a quadratic") {
  RngStream rng(8, "opt");
  Tensor w = Tensor::randn(4, 4, rng, 1.0, true);
  AdamW opt({w}, 5e-2);
  double first = 0;
  for (int i = 0; i < 200; ++i) {
    Tensor loss = mean_all(mul(w, w));
    if (i == 0) first = loss.item();
    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  Tensor final_loss = mean_all(mul(w, w));
  CHECK(final_loss.item() < 0.05 * first);
}

TEST_CASE("detach blocks gradients") {
  RngStream rng(9, "detach");
  Tensor x = Tensor::randn(3, 3, rng, 1.0, true);
  Tensor y = mean_all(mul(detach(x), x));
  y.backward();
  // d/dx of c*x where c = values of x (constant) -> grad = c / n.
  for (size_t i = 0; i < x.grad().size(); ++i)
    CHECK(x.grad()[i] == doctest::Approx(x.data()[i] / 9.0));
}

TEST_CASE("dropout zero rate is identity; mask scales kept entries") {
  RngStream rng(10, "drop");
  Tensor x = Tensor::randn(8, 8, rng, 1.0, false);
  Tensor y = dropout(x, 0.0, rng);
  CHECK(y.data() == x.data());
  RngStream rng2(10, "drop2");
  Tensor z = dropout(x, 0.5, rng2);
  int zeros = 0;
  for (size_t i = 0; i < z.numel(); ++i) {
    if (z.data()[i] == 0.0)
      ++zeros;
    else
      CHECK(z.data()[i] == doctest::Approx(x.data()[i] * 2.0));
  }
  CHECK(zeros > 10);
  CHECK(zeros < 54);
}
