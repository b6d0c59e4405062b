// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "revgen/common.hpp"
#include "revgen/pipeline.hpp"

using namespace revgen;
namespace fs = std::filesystem;

TEST_CASE("config: defaults, overrides, schema violations") {
  RunConfig def = RunConfig::from_json_text("{}");
  CHECK(def.sampler.ss_steps == 30);
  CHECK(def.sampler.slat_steps == 12);
  CHECK(def.sampler.ss_cfg == 7.5);
  CHECK(def.sampler.slat_cfg == 3.0);
  CHECK(def.sampler.alpha == 0.1);
  CHECK(def.sampler.view_discard_threshold == 0.8);
  CHECK(def.ss_train.drop_p == 0.3);
  CHECK(def.encoder.layers == 8);
  CHECK(def.flow.width == 128);
  CHECK(def.flow.blocks == 6);
  CHECK(def.flow.latent_dim == 8);

  RunConfig o = RunConfig::from_json_text(R"({"seed": 9, "flow": {"width": 64}})");
  CHECK(o.seed == 9);
  CHECK(o.flow.width == 64);

  CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"flow": {"wdith": 64}})"),
                       doctest::Contains("unknown key"), Error);
  CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"sampler": {"ss_steps": 0}})"),
                       doctest::Contains("outside"), Error);
  CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"sampler": {"ss_cfg": "hi"}})"),
                       doctest::Contains("number"), Error);
  CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"encoder": {"patch": 7}})"),
                       doctest::Contains("divide"), Error);
  CHECK_THROWS_AS(RunConfig::from_json_text("{nope"), Error);

  // Round-trip through the emitted JSON.
  RunConfig rt = RunConfig::from_json_text(o.to_json());
  CHECK(rt.flow.width == 64);
  CHECK(rt.seed == 9);
}

TEST_CASE("run records: deterministic id from config, persisted snapshot") {
  const auto root = fs::temp_directory_path() / "revgen_runs_test";
  fs::remove_all(root);
  setenv("REVGEN_RUNS", root.c_str(), 1);
  RunConfig cfg = RunConfig::from_json_text(R"({"seed": 4})");
  const std::string d1 = start_run("generate", cfg);
  const std::string d2 = start_run("generate", cfg);
  CHECK(d1 == d2);
  CHECK(fs::exists(fs::path(d1) / "config.json"));
  RunConfig cfg2 = cfg;
  cfg2.seed = 5;
  CHECK(start_run("generate", cfg2) != d1);
  CHECK(start_run("evaluate", cfg) != d1);
  unsetenv("REVGEN_RUNS");
  fs::remove_all(root);
}

TEST_CASE("octahedral rotations: 24 proper rotations, alignment recovers them") {
  const auto& rots = octahedral_rotations();
  REQUIRE(rots.size() == 24);
  for (const auto& r : rots) {
    CHECK(r.det() == doctest::Approx(1.0));
    Mat3 gram = r.transposed() * r;
    for (int i = 0; i < 9; ++i) CHECK(gram.m[i] == doctest::Approx(Mat3::identity().m[i]));
  }
  // All distinct.
  for (size_t i = 0; i < rots.size(); ++i)
    for (size_t j = i + 1; j < rots.size(); ++j) {
      double d = 0;
      for (int k = 0; k < 9; ++k) d += std::abs(rots[i].m[k] - rots[j].m[k]);
      CHECK(d > 1e-9);
    }

  VoxelObject obj = make_object(5, 3);
  for (int ri : {3, 11, 17}) {
    VoxelObject rotated = rotate_object(obj, rots[ri]);
    const int best = best_alignment_rotation(rotated, obj);
    VoxelObject back = rotate_object(rotated, rots[best]);
    CHECK(occupancy_iou(back, obj) == doctest::Approx(1.0));
  }
}

TEST_CASE("strided_view_pick spans the available range") {
  CHECK(strided_view_pick(16, 4) == std::vector<int>{0, 4, 8, 12});
  CHECK(strided_view_pick(16, 8) == std::vector<int>{0, 2, 4, 6, 8, 10, 12, 14});
  CHECK(strided_view_pick(3, 8) == std::vector<int>{0, 1, 2});
  CHECK(strided_view_pick(5, 1) == std::vector<int>{0});
}

TEST_CASE("evaluate_dirs: perfect prediction scores perfectly; aggregate is the mean") {
  const auto root = fs::temp_directory_path() / "revgen_eval_test";
  fs::remove_all(root);
  const auto gt_dir = root / "gt";
  DatasetManifest manifest = make_dataset(2, 3, gt_dir.string(), 99, 32, 16);

  const auto pred = root / "pred";
  for (const auto& e : manifest.objects) {
    fs::create_directories(pred / e.id);
    VoxelObject gt = load_gt_object((gt_dir / e.dir).string());
    save_tensor((pred / e.id / "object.bin").string(), gt.to_array());
  }
  EvalReport rep = evaluate_dirs(pred.string(), gt_dir.string());
  REQUIRE(rep.objects.size() == 2);
  for (const auto& ev : rep.objects) {
    CHECK(ev.psnr == doctest::Approx(99.0));
    // Pred and gt clouds are independent samplings of the same surface, so
    // CD is sampling noise rather than exactly zero.
    CHECK(ev.cd < 0.02);
    CHECK(ev.fscore == doctest::Approx(1.0));
    CHECK(ev.ssim == doctest::Approx(1.0));
  }
  const double mean_psnr = (rep.objects[0].psnr + rep.objects[1].psnr) / 2;
  CHECK(std::abs(rep.aggregate.psnr - mean_psnr) < 1e-9);
  const double mean_cd = (rep.objects[0].cd + rep.objects[1].cd) / 2;
  CHECK(std::abs(rep.aggregate.cd - mean_cd) < 1e-9);

  // Report writer: byte-identical regeneration, plots emitted.
  const auto run1 = root / "run1";
  fs::create_directories(run1);
  {
    std::ofstream f(run1 / "report.json");
    f << rep.to_json_text("{}") << "\n";
  }
  const auto out1 = root / "rep_out1";
  const auto out2 = root / "rep_out2";
  write_report({run1.string()}, out1.string());
  write_report({run1.string()}, out2.string());
  CHECK(fs::exists(out1 / "report.txt"));
  CHECK(fs::exists(out1 / "psnr_runs.png"));
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  CHECK(slurp(out1 / "report.txt") == slurp(out2 / "report.txt"));
  CHECK(slurp(out1 / "psnr_runs.png") == slurp(out2 / "psnr_runs.png"));

  // Missing runs are reported by name.
  CHECK_THROWS_WITH_AS(write_report({(root / "nope").string()}, (root / "rep3").string()),
                       doctest::Contains("nope"), Error);
  fs::remove_all(root);
}

TEST_CASE("rotate_object keeps colors with cells") {
  VoxelObject obj = make_object(9, 2);
  const auto& rots = octahedral_rotations();
  VoxelObject r = rotate_object(obj, rots[7]);
  CHECK(r.occupied_count() == obj.occupied_count());
  // Rotating back recovers the original buffers exactly.
  int inv = -1;
  for (int i = 0; i < 24; ++i) {
    Mat3 prod = rots[7] * rots[i];
    double d = 0;
    for (int k = 0; k < 9; ++k) d += std::abs(prod.m[k] - Mat3::identity().m[k]);
    if (d < 1e-9) inv = i;
  }
  REQUIRE(inv >= 0);
  VoxelObject back = rotate_object(r, rots[inv]);
  CHECK(back.occupancy == obj.occupancy);
  CHECK(back.color == obj.color);
}
