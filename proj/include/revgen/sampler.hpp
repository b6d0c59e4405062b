// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Rectified-flow Euler sampling with classifier-free guidance and
// rendering-aware velocity compensation: when t drops below the activation
// threshold the predicted clean latents are decoded, rendered at the refined
// input poses, compared against the input views, and the loss gradient is
// folded back into the velocity.

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "revgen/flow.hpp"
#include "revgen/pose.hpp"

namespace revgen {

struct SamplerConfig {
  int ss_steps = 30;
  int slat_steps = 12;
  double ss_cfg = 7.5;
  double slat_cfg = 3.0;
  double alpha = 0.1;                  // compensation strength
  double rvc_start = 0.5;              // RVC active when t < rvc_start
  double view_discard_threshold = 0.8;
  std::string loss_plugin = "ssim_l2";
  bool rvc_enabled = true;
  bool ggc_enabled = true;
  bool pvc_enabled = true;
  RenderConfig render;

  void validate() const;
};

// v_uncond + s * (v_cond - v_uncond)
std::vector<double> cfg_velocity(const std::vector<double>& v_cond,
                                 const std::vector<double>& v_uncond, double s);
// x0_hat = x_t - t * v
std::vector<double> predict_x0(const std::vector<double>& x_t, double t,
                               const std::vector<double>& v);
// x_{t_prev} = x_t - (t - t_prev) * (v + alpha * dv); requires t_prev < t.
std::vector<double> euler_step(const std::vector<double>& x_t, double t, double t_prev,
                               const std::vector<double>& v, const std::vector<double>& dv,
                               double alpha);
// Strictly decreasing 1 -> 0 with `steps` intervals.
std::vector<double> linear_schedule(int steps);

// Differentiable per-view rendering loss; eval returns a scalar tensor.
struct RvcLossPlugin {
  virtual ~RvcLossPlugin() = default;
  virtual std::string name() const = 0;
  virtual Tensor eval(const Tensor& rendered_hw4, const ImageBuffer& target) const = 0;
};
// Known plugins: "ssim_l2" (default, (1-SSIM) + pixel L2), "l2", "zero".
// "lpips" and "dreamsim" are declared but require external networks and throw
// a configuration error.
std::unique_ptr<RvcLossPlugin> make_loss_plugin(const std::string& name);

struct RvcReport {
  std::vector<double> per_view_loss;
  std::vector<bool> retained;
  int retained_count = 0;
  bool all_discarded = false;
  double delta_norm = 0;
};

// The differentiable decode->render->loss chain for one view (exposed for
// the finite-difference checks).
Tensor rvc_render_loss(const Tensor& x0_hat, const SLATCodec& codec,
                       const SparseStructure& positions, const Camera& camera,
                       const ImageBuffer& target, const RvcLossPlugin& plugin,
                       const RenderConfig& rc);

// Delta v = -t * d(mean retained loss)/d(x0_hat). Views whose loss exceeds
// the discard threshold are excluded; if every view is discarded the report
// flags it and the delta is zero.
std::vector<double> rvc_delta(const std::vector<double>& x_t, double t,
                              const std::vector<double>& v, const std::vector<Camera>& cameras,
                              const ViewSet& inputs, const SLATCodec& codec,
                              const SparseStructure& positions, const SamplerConfig& cfg,
                              RvcReport* report = nullptr);

struct TrajectoryStep {
  std::string stage;  // "ss" | "slat-prelim" | "slat-final"
  double t = 0;
  double state_norm = 0;
  double delta_norm = 0;
  int retained_views = -1;
  std::vector<double> per_view_loss;
  std::string warning;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  std::vector<std::string> warnings;
  void write_jsonl(const std::string& path) const;
};

struct GenerateModels {
  const EncoderModel* encoder = nullptr;
  const SSFlowModel* ss_flow = nullptr;
  const SLATFlowModel* slat_flow = nullptr;
  const SLATCodec* codec = nullptr;
};

struct GenerateResult {
  VoxelObject object;
  VoxelObject preliminary;
  SparseStructure structure;
  std::vector<PoseEstimate> poses;
  Trajectory trajectory;
};

// Full pipeline: encode -> conditions -> SS sampling -> sparsify ->
// preliminary SLAT -> pose refinement -> final SLAT with RVC -> decode.
GenerateResult generate(const ViewSet& views, const GenerateModels& models,
                        const SamplerConfig& cfg, uint64_t seed);

}  // namespace revgen
