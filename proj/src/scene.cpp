// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/scene.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "revgen/common.hpp"
#include "revgen/rng.hpp"

namespace revgen {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kOpacityLogit = 4.0;

struct Cell {
  int x, y, z;
};

// HSV (h in [0,1)) to RGB; used for distinct primitive colors.
std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double hh = h * 6.0;
  const int i = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

std::vector<Cell> primitive_cells(int type, int R, RngStream& rng) {
  // Sizes scale with the grid so small test resolutions stay buildable.
  const int dim_lo = std::max(2, (R * 5) / 16);
  const int dim_hi = std::max(dim_lo + 1, (R * 9) / 16);
  std::vector<Cell> cells;
  if (type == 0 || type == 2) {
    // Box (or L-shape carved from one).
    int dx = dim_lo + static_cast<int>(rng.uniform_index(dim_hi - dim_lo + 1));
    int dy = dim_lo + static_cast<int>(rng.uniform_index(dim_hi - dim_lo + 1));
    int dz = dim_lo + static_cast<int>(rng.uniform_index(dim_hi - dim_lo + 1));
    const bool carve = type == 2 && dx >= 4 && dy >= 4;
    const int cutx = carve ? dx / 2 + static_cast<int>(rng.uniform_index(2)) : 0;
    const int cuty = carve ? dy / 2 + static_cast<int>(rng.uniform_index(2)) : 0;
    for (int z = 0; z < dz; ++z)
      for (int y = 0; y < dy; ++y)
        for (int x = 0; x < dx; ++x) {
          if (carve && x >= dx - cutx && y >= dy - cuty) continue;  // corner column removed
          cells.push_back({x, y, z});
        }
  } else {
    // Sphere.
    const double r = std::max(1.0, R * 0.16 + rng.uniform() * R * 0.125);
    const int ir = static_cast<int>(std::ceil(r));
    for (int z = -ir; z <= ir; ++z)
      for (int y = -ir; y <= ir; ++y)
        for (int x = -ir; x <= ir; ++x)
          if (x * x + y * y + z * z <= r * r) cells.push_back({x + ir, y + ir, z + ir});
  }
  return cells;
}

void bounding(const std::vector<Cell>& cells, Cell& lo, Cell& hi) {
  lo = {INT32_MAX, INT32_MAX, INT32_MAX};
  hi = {INT32_MIN, INT32_MIN, INT32_MIN};
  for (const auto& c : cells) {
    lo.x = std::min(lo.x, c.x);
    lo.y = std::min(lo.y, c.y);
    lo.z = std::min(lo.z, c.z);
    hi.x = std::max(hi.x, c.x);
    hi.y = std::max(hi.y, c.y);
    hi.z = std::max(hi.z, c.z);
  }
}

}  // namespace

int VoxelObject::occupied_count() const {
  int n = 0;
  for (uint8_t o : occupancy) n += o != 0;
  return n;
}

Vec3 VoxelObject::cell_center(int x, int y, int z) const {
  const double h = cell_size();
  return {-1.0 + (x + 0.5) * h, -1.0 + (y + 0.5) * h, -1.0 + (z + 0.5) * h};
}

void VoxelObject::validate() const {
  const size_t n = (size_t)resolution * resolution * resolution;
  REVGEN_CHECK(occupancy.size() == n && color.size() == 3 * n && opacity_logit.size() == n,
               "VoxelObject: inconsistent buffer sizes");
  REVGEN_CHECK(occupied_count() > 0, "VoxelObject: no occupied cells");
  for (size_t i = 0; i < n; ++i) {
    if (occupancy[i]) {
      for (int c = 0; c < 3; ++c) {
        const double v = color[i * 3 + c];
        REVGEN_CHECK(v >= 0.0 && v <= 1.0, "VoxelObject: color outside [0,1]");
      }
    }
  }
}

Array VoxelObject::to_array() const {
  const int R = resolution;
  Array a = Array::zeros({5, R, R, R});
  const size_t n = cell_count();
  for (size_t i = 0; i < n; ++i) {
    a.data[i] = occupancy[i] ? 1.0 : 0.0;
    a.data[n + i] = color[i * 3 + 0];
    a.data[2 * n + i] = color[i * 3 + 1];
    a.data[3 * n + i] = color[i * 3 + 2];
    a.data[4 * n + i] = opacity_logit[i];
  }
  return a;
}

VoxelObject VoxelObject::from_array(const Array& a) {
  REVGEN_CHECK(a.shape.size() == 4 && a.shape[0] == 5 && a.shape[1] == a.shape[2] &&
                   a.shape[2] == a.shape[3],
               "VoxelObject::from_array: expected [5,R,R,R]");
  VoxelObject obj;
  obj.resolution = a.shape[1];
  const size_t n = (size_t)obj.resolution * obj.resolution * obj.resolution;
  obj.occupancy.resize(n);
  obj.color.resize(3 * n);
  obj.opacity_logit.resize(n);
  for (size_t i = 0; i < n; ++i) {
    obj.occupancy[i] = a.data[i] > 0.5 ? 1 : 0;
    obj.color[i * 3 + 0] = a.data[n + i];
    obj.color[i * 3 + 1] = a.data[2 * n + i];
    obj.color[i * 3 + 2] = a.data[3 * n + i];
    obj.opacity_logit[i] = a.data[4 * n + i];
  }
  return obj;
}

namespace {

template <typename EqualFn>
int flood_count(const VoxelObject& obj, EqualFn equal) {
  const int R = obj.resolution;
  std::vector<uint8_t> seen(obj.cell_count(), 0);
  int regions = 0;
  const int dx[6] = {1, -1, 0, 0, 0, 0};
  const int dy[6] = {0, 0, 1, -1, 0, 0};
  const int dz[6] = {0, 0, 0, 0, 1, -1};
  for (int z = 0; z < R; ++z)
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x) {
        const size_t i = obj.idx(x, y, z);
        if (!obj.occupancy[i] || seen[i]) continue;
        ++regions;
        std::queue<Cell> q;
        q.push({x, y, z});
        seen[i] = 1;
        while (!q.empty()) {
          Cell c = q.front();
          q.pop();
          for (int d = 0; d < 6; ++d) {
            const int nx = c.x + dx[d], ny = c.y + dy[d], nz = c.z + dz[d];
            if (nx < 0 || ny < 0 || nz < 0 || nx >= R || ny >= R || nz >= R) continue;
            const size_t j = obj.idx(nx, ny, nz);
            if (!obj.occupancy[j] || seen[j]) continue;
            if (!equal(obj.idx(c.x, c.y, c.z), j)) continue;
            seen[j] = 1;
            q.push({nx, ny, nz});
          }
        }
      }
  return regions;
}

}  // namespace

int color_region_count(const VoxelObject& obj) {
  return flood_count(obj, [&](size_t a, size_t b) {
    for (int c = 0; c < 3; ++c)
      if (std::abs(obj.color[a * 3 + c] - obj.color[b * 3 + c]) > 1e-9) return false;
    return true;
  });
}

int connected_component_count(const VoxelObject& obj) {
  return flood_count(obj, [](size_t, size_t) { return true; });
}

double occupancy_iou(const VoxelObject& a, const VoxelObject& b) {
  REVGEN_CHECK(a.resolution == b.resolution, "occupancy_iou: resolution mismatch");
  int inter = 0, uni = 0;
  for (size_t i = 0; i < a.cell_count(); ++i) {
    const bool oa = a.occupancy[i] != 0, ob = b.occupancy[i] != 0;
    inter += oa && ob;
    uni += oa || ob;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

VoxelObject make_object(uint64_t seed, int level, int resolution) {
  REVGEN_CHECK(level >= 1 && level <= 4, "make_object: complexity level must be in 1..4");
  const int R = resolution;

  for (int attempt = 0; attempt < 32; ++attempt) {
    RngStream rng(seed, "object/level" + std::to_string(level) + "/try" + std::to_string(attempt));
    VoxelObject obj;
    obj.resolution = R;
    obj.occupancy.assign((size_t)R * R * R, 0);
    obj.color.assign((size_t)R * R * R * 3, 0.0);
    obj.opacity_logit.assign((size_t)R * R * R, 0.0);

    const int n_prims = level;
    std::vector<std::array<double, 3>> palette;
    for (int p = 0; p < n_prims; ++p) {
      // Spread hues so flood-fill regions stay distinct.
      const double hue = std::fmod((p + rng.uniform() * 0.5) / n_prims, 1.0);
      palette.push_back(hsv_to_rgb(hue, 0.65 + 0.3 * rng.uniform(), 0.7 + 0.3 * rng.uniform()));
    }

    std::vector<Cell> occupied_cells;
    bool ok = true;
    for (int p = 0; p < n_prims && ok; ++p) {
      const int type = (level == 1) ? 0 : static_cast<int>(rng.uniform_index(3));
      std::vector<Cell> cells = primitive_cells(type, R, rng);
      Cell lo, hi;
      bounding(cells, lo, hi);
      const int sx = hi.x - lo.x + 1, sy = hi.y - lo.y + 1, sz = hi.z - lo.z + 1;

      Cell base;
      if (p == 0) {
        base = {R / 2 - sx / 2 + (int)rng.uniform_index(3) - 1,
                R / 2 - sy / 2 + (int)rng.uniform_index(3) - 1,
                R / 2 - sz / 2 + (int)rng.uniform_index(3) - 1};
      } else {
        // Anchor near an existing cell so the union stays 6-connected.
        const Cell anchor = occupied_cells[rng.uniform_index(occupied_cells.size())];
        base = {anchor.x - sx / 2 + (int)rng.uniform_index(3) - 1,
                anchor.y - sy / 2 + (int)rng.uniform_index(3) - 1,
                anchor.z - sz / 2 + (int)rng.uniform_index(3) - 1};
      }
      const int mx = R - sx > 2 ? 1 : 0;  // border margin when it fits
      const int my = R - sy > 2 ? 1 : 0;
      const int mz = R - sz > 2 ? 1 : 0;
      base.x = std::clamp(base.x - lo.x, mx, std::max(mx, R - sx - mx));
      base.y = std::clamp(base.y - lo.y, my, std::max(my, R - sy - my));
      base.z = std::clamp(base.z - lo.z, mz, std::max(mz, R - sz - mz));

      int painted = 0;
      for (const auto& c : cells) {
        const int x = base.x + c.x, y = base.y + c.y, z = base.z + c.z;
        if (x < 0 || y < 0 || z < 0 || x >= R || y >= R || z >= R) continue;
        const size_t i = obj.idx(x, y, z);
        if (obj.occupancy[i]) continue;  // first primitive to claim a cell keeps its color
        obj.occupancy[i] = 1;
        obj.opacity_logit[i] = kOpacityLogit;
        for (int ch = 0; ch < 3; ++ch) obj.color[i * 3 + ch] = palette[p][ch];
        occupied_cells.push_back({x, y, z});
        ++painted;
      }
      if (painted < std::max(3, R / 2)) ok = false;  // primitive swallowed; retry
    }
    if (!ok) continue;
    if (connected_component_count(obj) != 1) continue;
    if (color_region_count(obj) < level) continue;
    if (level == 1 && obj.occupied_count() < static_cast<int>(obj.cell_count() / 20)) continue;
    // Active-voxel budget keeps the latent-stage attention tractable.
    if (obj.occupied_count() > static_cast<int>(obj.cell_count() / 4)) continue;
    return obj;
  }
  REVGEN_FAIL("make_object: failed to build a connected object (seed " + std::to_string(seed) +
              ")");
}

std::vector<Camera> sample_cameras(int n, CameraMode mode, uint64_t seed, int image_size,
                                   double focal_px) {
  REVGEN_CHECK(n >= 1, "sample_cameras: n must be >= 1");
  if (focal_px <= 0) focal_px = kDefaultFocal64 * image_size / 64.0;
  RngStream rng(seed, mode == CameraMode::kUniform ? "cameras/uniform" : "cameras/limited");
  const double base_az = rng.uniform() * 2.0 * kPi;
  std::vector<Camera> cams;
  cams.reserve(n);
  for (int i = 0; i < n; ++i) {
    double az;
    if (mode == CameraMode::kUniform) {
      az = base_az + 2.0 * kPi * i / n;
    } else {
      az = base_az + (n == 1 ? 0.0 : (2.0 * kPi / 3.0) * i / (n - 1));
    }
    const double el = (-25.0 + 80.0 * rng.uniform()) * kPi / 180.0;
    Vec3 eye{kOrbitRadius * std::cos(el) * std::cos(az), kOrbitRadius * std::cos(el) * std::sin(az),
             kOrbitRadius * std::sin(el)};
    cams.push_back(Camera::look_at(eye, {0, 0, 0}, focal_px, image_size, image_size));
  }
  return cams;
}

std::vector<Camera> sample_cameras_sphere(int n, uint64_t seed, int image_size, double focal_px) {
  REVGEN_CHECK(n >= 1, "sample_cameras_sphere: n must be >= 1");
  if (focal_px <= 0) focal_px = kDefaultFocal64 * image_size / 64.0;
  RngStream rng(seed, "cameras/sphere");
  std::vector<Camera> cams;
  cams.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double z = rng.uniform(-0.95, 0.95);  // stay off the poles
    const double az = rng.uniform() * 2.0 * kPi;
    const double r = std::sqrt(1.0 - z * z);
    Vec3 eye{kOrbitRadius * r * std::cos(az), kOrbitRadius * r * std::sin(az), kOrbitRadius * z};
    cams.push_back(Camera::look_at(eye, {0, 0, 0}, focal_px, image_size, image_size));
  }
  return cams;
}

}  // namespace revgen
