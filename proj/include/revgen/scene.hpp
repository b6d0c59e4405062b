// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Procedural toy objects, camera sampling on the canonical radius-2.5 sphere,
// and the differentiable emission-absorption voxel renderer.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "revgen/camera.hpp"
#include "revgen/image.hpp"
#include "revgen/tensor.hpp"
#include "revgen/tensor_io.hpp"

namespace revgen {

// Colored occupancy grid on [-1,1]^3. Color and opacity are meaningful only
// on occupied cells (zeros elsewhere).
struct VoxelObject {
  int resolution = 16;
  std::vector<uint8_t> occupancy;      // R^3, x fastest
  std::vector<double> color;           // R^3 * 3
  std::vector<double> opacity_logit;   // R^3

  size_t cell_count() const { return occupancy.size(); }
  size_t idx(int x, int y, int z) const {
    return ((size_t)z * resolution + y) * resolution + x;
  }
  bool occupied(int x, int y, int z) const { return occupancy[idx(x, y, z)] != 0; }
  int occupied_count() const;
  // World position of a cell center.
  Vec3 cell_center(int x, int y, int z) const;
  double cell_size() const { return 2.0 / resolution; }
  void validate() const;

  Array to_array() const;                 // [5, R, R, R]: occ, r, g, b, logit
  static VoxelObject from_array(const Array& a);
};

// Count of 6-connected equal-color regions over occupied cells.
int color_region_count(const VoxelObject& obj);
int connected_component_count(const VoxelObject& obj);
double occupancy_iou(const VoxelObject& a, const VoxelObject& b);

// Deterministic procedural object; complexity level 1..4 controls primitive
// and color-region count.
VoxelObject make_object(uint64_t seed, int level, int resolution = 16);

enum class CameraMode { kUniform, kLimited };

constexpr double kOrbitRadius = 2.5;
constexpr double kDefaultFocal64 = 40.0;  // pixels at 64x64

std::vector<Camera> sample_cameras(int n, CameraMode mode, uint64_t seed, int image_size = 64,
                                   double focal_px = -1.0);
// Uniformly random directions over the full sphere (anchor views).
std::vector<Camera> sample_cameras_sphere(int n, uint64_t seed, int image_size = 64,
                                          double focal_px = -1.0);

struct ViewSet {
  std::vector<ImageBuffer> images;
  std::vector<Camera> cameras;              // may be empty (unknown poses)
  std::vector<std::vector<double>> depths;  // may be empty; 0 marks background
  int count() const { return static_cast<int>(images.size()); }
};

struct RenderOutput {
  ImageBuffer rgb;
  std::vector<double> alpha;  // H*W
  std::vector<double> depth;  // H*W, 0 where alpha ~ 0
  bool has_gradients = false;
};

struct RenderConfig {
  double density_scale = 60.0;  // sigma = sigmoid(logit) * density_scale
  int steps_per_axis = 2;       // ray steps = steps_per_axis * R
  double background = 1.0;      // white
};

// Plain (no-gradient) render of a voxel object.
RenderOutput render(const VoxelObject& obj, const Camera& camera, int image_size,
                    const RenderConfig& cfg = {});

// Differentiable render. `density` is [R^3,1] (>= 0, zero on empty cells) and
// `pcolor` is [R^3,3] premultiplied color (density * rgb). Returns [H*W,4]
// rows of (r,g,b,alpha); gradients flow to both inputs. Depth is not part of
// the differentiable output.
Tensor render_diff(const Tensor& density, const Tensor& pcolor, int resolution,
                   const Camera& camera, int image_size, const RenderConfig& cfg = {});

// density/pcolor grids of an object, as inputs for render_diff.
void object_render_grids(const VoxelObject& obj, const RenderConfig& cfg,
                         std::vector<double>& density, std::vector<double>& pcolor);

// ---------------------------------------------------------------------------
// Dataset

struct DatasetObjectEntry {
  std::string id;
  uint64_t seed = 0;
  int level = 1;
  int n_views = 0;
  std::string dir;  // relative to the dataset root
};

struct DatasetManifest {
  int n_objects = 0;
  int n_views = 0;
  int image_size = 64;
  int resolution = 16;
  uint64_t seed = 0;
  std::vector<DatasetObjectEntry> objects;
};

DatasetManifest make_dataset(int n_objects, int n_views, const std::string& out_dir,
                             uint64_t seed, int image_size = 64, int resolution = 16);
DatasetManifest load_manifest(const std::string& dir);

ViewSet load_views(const std::string& object_dir);
VoxelObject load_gt_object(const std::string& object_dir);
// The four fixed held-out evaluation cameras for an object.
std::vector<Camera> novel_cameras(const DatasetObjectEntry& entry, int image_size);

void save_cameras_json(const std::string& path, const std::vector<Camera>& cams);
std::vector<Camera> load_cameras_json(const std::string& path);

}  // namespace revgen
