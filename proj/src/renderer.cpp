// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Emission-absorption ray marching over a voxel grid with trilinear sampling
// and front-to-back compositing on a white background. Color is carried
// premultiplied by density so interpolation near surfaces does not bleed into
// empty (black) cells. The backward pass re-marches each ray and uses suffix
// sums for the transmittance chain rule.

#include <cmath>

#include "revgen/common.hpp"
#include "revgen/scene.hpp"

namespace revgen {

namespace {

struct TrilinearTap {
  size_t index;
  double weight;
};

// Taps for a world position; cells outside the grid contribute zero.
int trilinear_taps(const Vec3& p, int R, TrilinearTap taps[8]) {
  const double h = 2.0 / R;
  const double ux = (p.x + 1.0) / h - 0.5;
  const double uy = (p.y + 1.0) / h - 0.5;
  const double uz = (p.z + 1.0) / h - 0.5;
  const int ix = static_cast<int>(std::floor(ux));
  const int iy = static_cast<int>(std::floor(uy));
  const int iz = static_cast<int>(std::floor(uz));
  const double fx = ux - ix, fy = uy - iy, fz = uz - iz;
  int count = 0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const int x = ix + dx, y = iy + dy, z = iz + dz;
        if (x < 0 || y < 0 || z < 0 || x >= R || y >= R || z >= R) continue;
        const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
        if (w == 0.0) continue;
        taps[count++] = {((size_t)z * R + y) * R + x, w};
      }
  return count;
}

bool ray_box(const Vec3& o, const Vec3& d, double& t0, double& t1) {
  t0 = 0.0;
  t1 = 1e30;
  const double od[3] = {o.x, o.y, o.z};
  const double dd[3] = {d.x, d.y, d.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dd[a]) < 1e-12) {
      if (od[a] < -1.0 || od[a] > 1.0) return false;
      continue;
    }
    double ta = (-1.0 - od[a]) / dd[a];
    double tb = (1.0 - od[a]) / dd[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t1 > t0;
}

constexpr double kColorEps = 1e-8;

struct RaySample {
  double sigma;
  double pc[3];
  double a;      // alpha of the sample
  double w;      // T * a
  double t;      // camera depth
  TrilinearTap taps[8];
  int tap_count;
};

// Forward march of one ray. Returns accumulated (rgb, alpha, depth) and, if
// `samples` is non-null, the per-sample state needed by the backward pass.
void march_ray(const double* density, const double* pcolor, int R, const Camera& cam,
               const RenderConfig& cfg, int steps, double u, double v, double out[5],
               std::vector<RaySample>* samples) {
  Vec3 o, d;
  cam.pixel_ray(u, v, o, d);
  double t0, t1;
  double rgb[3] = {0, 0, 0};
  double transmit = 1.0;
  double depth_sum = 0.0;
  if (ray_box(o, d, t0, t1)) {
    const double dt = (t1 - t0) / steps;
    const double dl = dt * d.norm();  // world-space length per step
    for (int s = 0; s < steps; ++s) {
      const double t = t0 + (s + 0.5) * dt;
      const Vec3 p = o + d * t;
      TrilinearTap taps[8];
      const int nt = trilinear_taps(p, R, taps);
      double sigma = 0.0, pc[3] = {0, 0, 0};
      for (int i = 0; i < nt; ++i) {
        sigma += taps[i].weight * density[taps[i].index];
        for (int c = 0; c < 3; ++c) pc[c] += taps[i].weight * pcolor[taps[i].index * 3 + c];
      }
      const double a = 1.0 - std::exp(-sigma * dl);
      const double w = transmit * a;
      const double inv_sigma = 1.0 / (sigma + kColorEps);
      for (int c = 0; c < 3; ++c) rgb[c] += w * pc[c] * inv_sigma;
      depth_sum += w * t;
      transmit *= 1.0 - a;
      if (samples) {
        RaySample rs;
        rs.sigma = sigma;
        rs.pc[0] = pc[0];
        rs.pc[1] = pc[1];
        rs.pc[2] = pc[2];
        rs.a = a;
        rs.w = w;
        rs.t = t;
        rs.tap_count = nt;
        for (int i = 0; i < nt; ++i) rs.taps[i] = taps[i];
        samples->push_back(rs);
      }
      if (transmit < 1e-7 && !samples) break;  // opaque; backward keeps full schedule
    }
  }
  const double alpha = 1.0 - transmit;
  out[0] = rgb[0] + transmit * cfg.background;
  out[1] = rgb[1] + transmit * cfg.background;
  out[2] = rgb[2] + transmit * cfg.background;
  out[3] = alpha;
  out[4] = alpha > 1e-6 ? depth_sum / alpha : 0.0;
}

}  // namespace

void object_render_grids(const VoxelObject& obj, const RenderConfig& cfg,
                         std::vector<double>& density, std::vector<double>& pcolor) {
  const size_t n = obj.cell_count();
  density.assign(n, 0.0);
  pcolor.assign(n * 3, 0.0);
  for (size_t i = 0; i < n; ++i) {
    if (!obj.occupancy[i]) continue;
    const double s = cfg.density_scale / (1.0 + std::exp(-obj.opacity_logit[i]));
    density[i] = s;
    for (int c = 0; c < 3; ++c) pcolor[i * 3 + c] = s * obj.color[i * 3 + c];
  }
}

RenderOutput render(const VoxelObject& obj, const Camera& camera, int image_size,
                    const RenderConfig& cfg) {
  REVGEN_CHECK(image_size > 0, "render: image size must be positive");
  REVGEN_CHECK(obj.occupied_count() > 0, "render: empty object");
  std::vector<double> density, pcolor;
  object_render_grids(obj, cfg, density, pcolor);

  const int R = obj.resolution;
  const int steps = cfg.steps_per_axis * R;
  RenderOutput out;
  out.rgb = ImageBuffer::make(image_size, image_size, 3);
  out.alpha.assign((size_t)image_size * image_size, 0.0);
  out.depth.assign((size_t)image_size * image_size, 0.0);
  for (int y = 0; y < image_size; ++y)
    for (int x = 0; x < image_size; ++x) {
      double px[5];
      march_ray(density.data(), pcolor.data(), R, camera, cfg, steps, x + 0.5, y + 0.5, px,
                nullptr);
      for (int c = 0; c < 3; ++c)
        out.rgb.at(y, x, c) = std::clamp(px[c], 0.0, 1.0);
      out.alpha[(size_t)y * image_size + x] = px[3];
      out.depth[(size_t)y * image_size + x] = px[4];
    }
  return out;
}

Tensor render_diff(const Tensor& density, const Tensor& pcolor, int resolution,
                   const Camera& camera, int image_size, const RenderConfig& cfg) {
  REVGEN_CHECK(image_size > 0, "render_diff: image size must be positive");
  const int R = resolution;
  const size_t cells = (size_t)R * R * R;
  REVGEN_CHECK(density.cols() == 1 && density.numel() == cells,
               "render_diff: density must be [R^3,1]");
  REVGEN_CHECK(pcolor.cols() == 3 && (size_t)pcolor.rows() == cells,
               "render_diff: pcolor must be [R^3,3]");
  const int steps = cfg.steps_per_axis * R;
  const int hw = image_size * image_size;

  std::vector<double> value((size_t)hw * 4);
  {
    const double* dv = density.data().data();
    const double* pv = pcolor.data().data();
    for (int y = 0; y < image_size; ++y)
      for (int x = 0; x < image_size; ++x) {
        double px[5];
        march_ray(dv, pv, R, camera, cfg, steps, x + 0.5, y + 0.5, px, nullptr);
        double* row = value.data() + ((size_t)y * image_size + x) * 4;
        row[0] = px[0];
        row[1] = px[1];
        row[2] = px[2];
        row[3] = px[3];
      }
  }

  Camera cam = camera;
  RenderConfig rc = cfg;
  return custom_op(
      hw, 4, std::move(value), {density, pcolor},
      [R, cam, rc, steps, image_size](TensorNode& self) {
        auto& pdensity = self.parents[0];
        auto& ppcolor = self.parents[1];
        const double* dv = pdensity->value.data();
        const double* pv = ppcolor->value.data();
        std::vector<RaySample> samples;
        samples.reserve(steps);
        for (int y = 0; y < image_size; ++y)
          for (int x = 0; x < image_size; ++x) {
            const double* g = self.grad.data() + ((size_t)y * image_size + x) * 4;
            if (g[0] == 0 && g[1] == 0 && g[2] == 0 && g[3] == 0) continue;
            samples.clear();
            double px[5];
            march_ray(dv, pv, R, cam, rc, steps, x + 0.5, y + 0.5, px, &samples);
            if (samples.empty()) continue;
            double transmit_final = 1.0;
            for (const auto& rs : samples) transmit_final *= 1.0 - rs.a;
            const double dl_scale = [&] {  // recompute world step length
              Vec3 o, d;
              cam.pixel_ray(x + 0.5, y + 0.5, o, d);
              double t0, t1;
              if (!ray_box(o, d, t0, t1)) return 0.0;
              return (t1 - t0) / steps * d.norm();
            }();
            // dL/dT_final via background and alpha outputs.
            const double bg = rc.background;
            const double dL_dTfinal = (g[0] + g[1] + g[2]) * bg - g[3];
            // Suffix sum over j>i of (g . c_j) w_j.
            double suffix = 0.0;
            std::vector<double> gc(samples.size());
            for (size_t i = 0; i < samples.size(); ++i) {
              const auto& rs = samples[i];
              const double inv_sigma = 1.0 / (rs.sigma + kColorEps);
              gc[i] = (g[0] * rs.pc[0] + g[1] * rs.pc[1] + g[2] * rs.pc[2]) * inv_sigma;
            }
            for (size_t ii = samples.size(); ii-- > 0;) {
              const auto& rs = samples[ii];
              const double inv_sigma = 1.0 / (rs.sigma + kColorEps);
              const double one_minus_a = std::max(1.0 - rs.a, 1e-300);
              const double transmit_i = rs.a > 0 ? rs.w / rs.a
                                                 : 0.0;  // T_i; a==0 handled below
              // T_i is also recoverable as product; w = T*a so T = w/a unless a == 0.
              double T_i = transmit_i;
              if (rs.a <= 0) {
                T_i = 1.0;
                for (size_t j = 0; j < ii; ++j) T_i *= 1.0 - samples[j].a;
              }
              // d/da_i of the composite; dT_final/da_i = -T_final/(1-a_i).
              const double da = T_i * gc[ii] - suffix / one_minus_a -
                                dL_dTfinal * transmit_final / one_minus_a;
              // d a / d sigma = dl * exp(-sigma dl) = dl * (1 - a)
              double dsigma = da * dl_scale * (1.0 - rs.a);
              // Color path: rgb += w * pc / (sigma + eps)
              const double wv = rs.w;
              dsigma += -(g[0] * rs.pc[0] + g[1] * rs.pc[1] + g[2] * rs.pc[2]) * wv * inv_sigma *
                        inv_sigma;
              double dpc[3] = {g[0] * wv * inv_sigma, g[1] * wv * inv_sigma,
                               g[2] * wv * inv_sigma};
              for (int tap = 0; tap < rs.tap_count; ++tap) {
                const auto& tp = rs.taps[tap];
                if (pdensity->requires_grad) pdensity->grad[tp.index] += tp.weight * dsigma;
                if (ppcolor->requires_grad)
                  for (int c = 0; c < 3; ++c)
                    ppcolor->grad[tp.index * 3 + c] += tp.weight * dpc[c];
              }
              suffix += gc[ii] * rs.w;
            }
          }
      });
}

}  // namespace revgen
