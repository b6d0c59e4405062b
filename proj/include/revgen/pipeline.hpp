// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end orchestration shared by the CLI and the acceptance suite:
// stage training, checkpoint loading, generation from dataset directories,
// metric evaluation with axis-aligned alignment, and the ablation harness.

#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "revgen/config.hpp"
#include "revgen/metrics.hpp"
#include "revgen/sampler.hpp"

namespace revgen {

struct Stages {
  std::unique_ptr<EncoderModel> encoder;
  std::unique_ptr<SSFlowModel> ss;
  std::unique_ptr<SLATFlowModel> slat;
  std::unique_ptr<SLATCodec> codec;
  GenerateModels models() const;
};

// Trains encoder, codec, SS flow and SLAT flow; writes checkpoints to the
// config paths and a loss log per stage.
void train_encoder_stage(const RunConfig& cfg, std::ostream& log);
void train_ss_stage(const RunConfig& cfg, std::ostream& log);
void train_slat_stage(const RunConfig& cfg, std::ostream& log);  // codec first, then flow
Stages load_stages(const RunConfig::Paths& paths);

// The 24 proper axis-aligned rotations (index 0 is the identity).
const std::vector<Mat3>& octahedral_rotations();
VoxelObject rotate_object(const VoxelObject& obj, const Mat3& rot);
// Best rotation index aligning `gen` onto `gt` by occupancy IoU.
int best_alignment_rotation(const VoxelObject& gen, const VoxelObject& gt);

// Renders both objects from the object's four held-out cameras and reports
// mean PSNR/SSIM plus aligned CD/F-score.
struct ObjectEval {
  std::string id;
  double psnr = 0;
  double ssim = 0;
  double cd = 0;
  double fscore = 0;
  std::optional<PoseMetrics> pose;
};
ObjectEval evaluate_object(const VoxelObject& gen, const VoxelObject& gt,
                           const DatasetObjectEntry& entry, int image_size,
                           const RenderConfig& rc);

struct EvalReport {
  std::vector<ObjectEval> objects;
  ObjectEval aggregate;  // means; id = "mean"
  std::string to_json_text(const std::string& config_echo) const;
};
// pred_dir holds one subdirectory per object with object.bin (+ poses.json);
// gt_dir is a dataset root.
EvalReport evaluate_dirs(const std::string& pred_dir, const std::string& gt_dir);

// Generation against a dataset object directory; uses the first
// `n_views` evenly strided stored views as inputs.
GenerateResult generate_from_dir(const std::string& object_dir, const Stages& stages,
                                 const SamplerConfig& cfg, uint64_t seed, int n_views);
std::vector<int> strided_view_pick(int available, int wanted);

// Mean PSNR between the inputs and the object rendered at the refined poses.
double input_view_psnr(const VoxelObject& obj, const std::vector<PoseEstimate>& poses,
                       const ViewSet& inputs, const RenderConfig& rc);

struct AblationRow {
  std::string name;
  bool ggc = true, pvc = true, rvc = true;
  double psnr = 0, ssim = 0, cd = 0, fscore = 0, input_psnr = 0;
};
struct SweepPoint {
  int views = 0;
  double psnr = 0, ssim = 0, cd = 0, fscore = 0;
};
struct AblationResult {
  std::vector<AblationRow> rows;    // (a)..(d)
  std::vector<SweepPoint> sweep;    // view counts {2,4,6,8}
};

// Runs the four toggle rows and the view-count sweep on the first
// `n_objects` entries of `eval_dir`; writes table.txt, ablation.json and
// plots into out_dir when non-empty.
AblationResult run_ablation(const RunConfig& cfg, const Stages& stages,
                            const std::string& eval_dir, int n_objects, int n_views,
                            const std::string& out_dir, std::ostream& log);

// Run records: creates <runs_root>/<subcommand>-<confighash>/ and persists
// the config snapshot; returns the directory.
std::string start_run(const std::string& subcommand, const RunConfig& cfg);

// Emits a text table + plots aggregating previously written reports.
void write_report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

}  // namespace revgen
