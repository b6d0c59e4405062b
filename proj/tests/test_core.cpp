// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "revgen/camera.hpp"
#include "revgen/common.hpp"
#include "revgen/image.hpp"
#include "revgen/rng.hpp"
#include "revgen/tensor_io.hpp"

using namespace revgen;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir() {
  auto d = fs::temp_directory_path() / "revgen_core_test";
  fs::create_directories(d);
  return d;
}
}  // namespace

TEST_CASE("rng streams are deterministic and label/seed separated") {
  RngStream a(42, "noise"), b(42, "noise");
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(42, "noise"), d(42, "init"), e(43, "noise");
  int diff_label = 0, diff_seed = 0;
  RngStream c2(42, "noise");
  for (int i = 0; i < 64; ++i) {
    const uint64_t v = c2.next_u64();
    diff_label += v != d.next_u64();
    diff_seed += v != e.next_u64();
  }
  CHECK(diff_label > 60);
  CHECK(diff_seed > 60);
}

TEST_CASE("rng label streams look uncorrelated") {
  RngStream a(1, "alpha"), b(1, "beta");
  const int n = 20000;
  double sum_ab = 0, sum_a = 0, sum_b = 0, sum_a2 = 0, sum_b2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.uniform(), y = b.uniform();
    sum_ab += x * y;
    sum_a += x;
    sum_b += y;
    sum_a2 += x * x;
    sum_b2 += y * y;
  }
  const double cov = sum_ab / n - (sum_a / n) * (sum_b / n);
  const double var_a = sum_a2 / n - (sum_a / n) * (sum_a / n);
  const double var_b = sum_b2 / n - (sum_b / n) * (sum_b / n);
  CHECK(std::abs(cov / std::sqrt(var_a * var_b)) < 0.05);
}

TEST_CASE("rng normal moments") {
  RngStream s(3, "normal");
  const int n = 50000;
  double mean = 0, m2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal();
    mean += x;
    m2 += x * x;
  }
  mean /= n;
  m2 /= n;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(m2 - 1.0) < 0.03);
}

TEST_CASE("tensor file round-trip is bit-exact") {
  const auto dir = temp_dir();
  Array a;
  a.shape = {2, 3};
  a.data = {0, 0, 0, 0, 0, 0};
  const std::string p = (dir / "zeros.bin").string();
  save_tensor(p, a);
  Array b = load_tensor(p);
  CHECK(b.shape == a.shape);
  CHECK(b.data == a.data);

  RngStream rng(5, "io");
  Array r;
  r.shape = {4, 7, 3};
  r.data.resize(r.numel());
  for (auto& v : r.data) v = static_cast<double>(static_cast<float>(rng.normal()));
  const std::string pr = (dir / "rand.bin").string();
  save_tensor(pr, r);
  save_tensor((dir / "rand2.bin").string(), load_tensor(pr));
  std::ifstream f1(pr, std::ios::binary), f2(dir / "rand2.bin", std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}

TEST_CASE("tensor file zero-length axis round-trips") {
  const auto dir = temp_dir();
  Array a;
  a.shape = {0, 5};
  const std::string p = (dir / "empty.bin").string();
  save_tensor(p, a);
  Array b = load_tensor(p);
  CHECK(b.shape == std::vector<int>{0, 5});
  CHECK(b.data.empty());
}

TEST_CASE("tensor file corruption is reported with the offending field") {
  const auto dir = temp_dir();
  Array a;
  a.shape = {2, 2};
  a.data = {1, 2, 3, 4};
  const std::string p = (dir / "corrupt.bin").string();
  save_tensor(p, a);
  // Truncate payload.
  {
    std::ifstream in(p, std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out(p, std::ios::binary);
    out.write(all.data(), static_cast<std::streamsize>(all.size() - 4));
  }
  CHECK_THROWS_WITH_AS(load_tensor(p), doctest::Contains("payload"), Error);

  const std::string pm = (dir / "magic.bin").string();
  {
    std::ofstream out(pm, std::ios::binary);
    out << "NOPE f32 1 3\n";
    out.write("\0\0\0\0\0\0\0\0\0\0\0\0", 12);
  }
  CHECK_THROWS_WITH_AS(load_tensor(pm), doctest::Contains("magic"), Error);
}

TEST_CASE("png round-trip preserves quantized bytes") {
  const auto dir = temp_dir();
  RngStream rng(9, "png");
  ImageBuffer img = ImageBuffer::make(13, 17, 3);
  for (auto& v : img.values) v = rng.uniform();
  const std::string p = (dir / "img.png").string();
  save_png(p, img);
  ImageBuffer back = load_png(p);
  REQUIRE(back.height == 13);
  REQUIRE(back.width == 17);
  REQUIRE(back.channels == 3);
  for (size_t i = 0; i < img.values.size(); ++i) {
    const double q = std::lround(img.values[i] * 255.0) / 255.0;
    CHECK(back.values[i] == doctest::Approx(q).epsilon(1e-12));
  }
  // Second write of the loaded image is byte-identical (stability).
  const std::string p2 = (dir / "img2.png").string();
  const std::string p3 = (dir / "img3.png").string();
  save_png(p2, back);
  save_png(p3, load_png(p2));
  std::ifstream f2(p2, std::ios::binary), f3(p3, std::ios::binary);
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  std::string s3((std::istreambuf_iterator<char>(f3)), std::istreambuf_iterator<char>());
  CHECK(s2 == s3);
}

TEST_CASE("camera projects the optical axis to the principal point") {
  Camera cam(100, 100, 64, 64, 128, 128, Mat3::identity(), Vec3{0, 0, 0});
  auto pd = cam.project({0, 0, 1});
  CHECK(pd.u == doctest::Approx(64));
  CHECK(pd.v == doctest::Approx(64));
  CHECK(pd.depth == doctest::Approx(1));

  auto pd2 = cam.project({0.1, 0, 1});
  CHECK(pd2.u == doctest::Approx(74));
  CHECK(pd2.v == doctest::Approx(64));

  CHECK_THROWS_AS(cam.project({0, 0, -1}), Error);
}

TEST_CASE("unproject inverts project") {
  Camera cam(100, 100, 64, 64, 128, 128, Mat3::identity(), Vec3{0, 0, 0});
  CHECK((cam.unproject(64, 64, 1) - Vec3{0, 0, 1}).norm() < 1e-12);
  CHECK((cam.unproject(74, 64, 2) - Vec3{0.2, 0, 2}).norm() < 1e-12);
  CHECK_THROWS_AS(cam.unproject(10, 10, 0.0), Error);

  RngStream rng(13, "proj");
  Mat3 rot = rotation_about_axis({0.3, -0.5, 0.8}, 0.7);
  Camera cam2(90, 110, 30, 40, 64, 80, rot, Vec3{0.2, -0.1, 0.5});
  for (int i = 0; i < 100; ++i) {
    const double u = rng.uniform(0, 64), v = rng.uniform(0, 80), d = rng.uniform(0.5, 4.0);
    Vec3 w = cam2.unproject(u, v, d);
    auto pd = cam2.project(w);
    CHECK(std::abs(pd.u - u) < 1e-6);
    CHECK(std::abs(pd.v - v) < 1e-6);
    CHECK(std::abs(pd.depth - d) < 1e-9);
  }
}

TEST_CASE("camera construction rejects non-orthonormal rotations") {
  Mat3 bad = Mat3::identity();
  bad(0, 0) = 1.1;
  CHECK_THROWS_AS(Camera(100, 100, 32, 32, 64, 64, bad, Vec3{}), Error);
  Mat3 reflect = Mat3::identity();
  reflect(2, 2) = -1;
  CHECK_THROWS_AS(Camera(100, 100, 32, 32, 64, 64, reflect, Vec3{}), Error);
  CHECK_THROWS_AS(Camera(-1, 100, 32, 32, 64, 64, Mat3::identity(), Vec3{}), Error);
}

TEST_CASE("svd3 and orthonormalize_rotation recover rotations") {
  RngStream rng(17, "svd");
  for (int i = 0; i < 50; ++i) {
    Mat3 r = rotation_about_axis({rng.normal(), rng.normal(), rng.normal()}, rng.uniform(0, 3));
    Mat3 noisy = r;
    for (auto& v : noisy.m) v += 1e-3 * rng.normal();
    Mat3 fixed = orthonormalize_rotation(noisy);
    CHECK(rotation_geodesic_deg(fixed, r) < 0.5);
    Mat3 gram = fixed.transposed() * fixed;
    for (int k = 0; k < 9; ++k)
      CHECK(std::abs(gram.m[k] - Mat3::identity().m[k]) < 1e-9);
    CHECK(fixed.det() == doctest::Approx(1.0).epsilon(1e-9));
  }
}
