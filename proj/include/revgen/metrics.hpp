// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "revgen/camera.hpp"
#include "revgen/image.hpp"
#include "revgen/scene.hpp"
#include "revgen/tensor.hpp"

namespace revgen {

using PointCloud = std::vector<Vec3>;

// 10*log10(1/MSE) over all channels; exact match capped at 99 dB.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

// Windowed SSIM on the luma channel: 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, dynamic range 1, mean over valid windows.
double ssim(const ImageBuffer& a, const ImageBuffer& b);
// Differentiable 1-SSIM between a gray tensor [H*W,1] and a constant target.
Tensor ssim_loss(const Tensor& gray, const std::vector<double>& target_gray, int h, int w);
// The normalized 11x11 window used by both paths.
const std::vector<double>& ssim_window();

// Symmetric Chamfer distance: 0.5*(mean_a min_b |a-b| + mean_b min_a |a-b|),
// grid-accelerated nearest neighbors (exact).
double chamfer(const PointCloud& a, const PointCloud& b);
// Precision/recall F-score at radius r.
double fscore(const PointCloud& a, const PointCloud& b, double r = 0.1);

// Uniform sampling over exposed voxel faces; deterministic in seed.
PointCloud sample_surface(const VoxelObject& obj, int n = 10000, uint64_t seed = 0);

struct PoseMetrics {
  double rre_deg = 0;    // mean over views 2..N
  double acc15 = 0;
  double acc30 = 0;
  double te = 0;         // mean normalized center error
  std::vector<double> per_view_rre;  // views 2..N
};

// Appendix-style protocol: both sets expressed relative to their first
// camera (which is excluded), relative translations normalized by their
// per-set mean L2 norm.
PoseMetrics pose_metrics(const std::vector<Camera>& pred, const std::vector<Camera>& gt);

}  // namespace revgen
