// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Pose pipeline: render anchor views of the generated object, recover coarse
// input poses through the encoder by aligning predicted anchor poses to their
// known cameras, then per input view match against renders, lift matches to
// 3-D through rendered depth and solve PnP inside RANSAC with Gauss-Newton
// polish.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "revgen/encoder.hpp"
#include "revgen/scene.hpp"

namespace revgen {

struct Correspondence {
  double u = 0, v = 0;   // input-image pixel
  Vec3 point;            // object-frame 3-D point
  double score = 1.0;    // match confidence
};

enum class PoseStatus { kOk, kDegenerate, kFallback };

struct PoseEstimate {
  std::optional<Camera> camera;
  int inliers = 0;
  double reprojection_rms = 0.0;
  PoseStatus status = PoseStatus::kFallback;
};

struct Match {
  int ax = 0, ay = 0;  // pixel in image a
  int bx = 0, by = 0;  // pixel in image b
  double ncc = 0.0;
  double sub_bx = 0, sub_by = 0;  // sub-pixel refinement of (bx, by)
};

struct MatchConfig {
  int patch = 9;
  double ncc_threshold = 0.7;
  int max_corners = 200;
  double corner_rel_threshold = 0.01;
};

struct PnPConfig {
  int ransac_iters = 500;
  double reproj_threshold_px = 2.0;
  int gn_iters = 12;
  uint64_t seed = 0;
};

struct RefineConfig {
  int anchor_count = 30;
  int anchors_to_match = 2;  // nearest anchors matched in addition to the coarse-pose render
  MatchConfig match;
  PnPConfig pnp;
  uint64_t seed = 0;
};

// Renders k views from cameras sampled uniformly on the canonical sphere;
// cameras and depth maps are recorded exactly.
ViewSet anchor_render(const VoxelObject& obj, int k, uint64_t seed, int image_size = 64);

// Runs the encoder pose head on anchors+inputs jointly and maps predicted
// input poses into the anchor (object) frame via a similarity fit over the
// anchors. Requires >= 3 anchors.
std::vector<Camera> coarse_pose(const ViewSet& inputs, const ViewSet& anchors,
                                const EncoderModel& encoder);

// The alignment step of coarse_pose: `preds` holds predictions for the
// anchors followed by the inputs (in one shared frame); returns world-frame
// cameras for the inputs.
std::vector<Camera> align_predictions_to_anchors(const std::vector<CameraPrediction>& preds,
                                                 const ViewSet& anchors, int n_inputs,
                                                 int image_size);

// Harris corners + mutual-best 9x9 NCC matching.
std::vector<Match> match_images(const ImageBuffer& rendered, const ImageBuffer& input,
                                const MatchConfig& cfg = {});

// Lifts matches into 3-D through the anchor depth map; matches landing on
// background (zero-depth) pixels are dropped.
std::vector<Correspondence> lift_matches(const std::vector<Match>& matches,
                                         const std::vector<double>& anchor_depth,
                                         const Camera& anchor_camera);

// RANSAC over minimal 6-point DLT solutions with Gauss-Newton refinement on
// the inlier set. Requires >= 6 correspondences.
PoseEstimate pnp_ransac(const std::vector<Correspondence>& corrs, const Camera& intrinsics,
                        const PnPConfig& cfg = {});

// Full per-view refinement: anchors -> coarse poses -> match against the
// render at each coarse pose plus the nearest anchors -> lift -> PnP. Views
// whose pipeline fails keep their coarse pose with status kFallback.
std::vector<PoseEstimate> refine_all(const ViewSet& inputs, const VoxelObject& obj,
                                     const EncoderModel& encoder, const RefineConfig& cfg = {});

// Exposed for tests: minimal-DLT pose from >= 6 correspondences.
bool pnp_dlt(const std::vector<Correspondence>& corrs, const Camera& intrinsics, Mat3& rot,
             Vec3& trans);

}  // namespace revgen
