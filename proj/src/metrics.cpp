// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "revgen/common.hpp"
#include "revgen/rng.hpp"

namespace revgen {

namespace {
constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  REVGEN_CHECK(a.width == b.width && a.height == b.height && a.channels == b.channels,
               "psnr: shape mismatch");
  double mse = 0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    mse += d * d;
  }
  mse /= a.values.size();
  if (mse <= 0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

const std::vector<double>& ssim_window() {
  static const std::vector<double> win = [] {
    std::vector<double> g1(kWin);
    double sum = 0;
    for (int i = 0; i < kWin; ++i) {
      const double d = i - kWin / 2;
      g1[i] = std::exp(-d * d / (2 * kSigma * kSigma));
      sum += g1[i];
    }
    for (auto& v : g1) v /= sum;
    std::vector<double> w(kWin * kWin);
    for (int y = 0; y < kWin; ++y)
      for (int x = 0; x < kWin; ++x) w[y * kWin + x] = g1[y] * g1[x];
    return w;
  }();
  return win;
}

namespace {

// Valid-region windowed convolution with the SSIM Gaussian.
std::vector<double> win_conv(const std::vector<double>& img, int h, int w) {
  const auto& win = ssim_window();
  const int oh = h - kWin + 1, ow = w - kWin + 1;
  std::vector<double> out((size_t)oh * ow, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int ky = 0; ky < kWin; ++ky)
        for (int kx = 0; kx < kWin; ++kx)
          s += win[ky * kWin + kx] * img[(size_t)(y + ky) * w + (x + kx)];
      out[(size_t)y * ow + x] = s;
    }
  return out;
}

}  // namespace

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  REVGEN_CHECK(a.width == b.width && a.height == b.height, "ssim: shape mismatch");
  REVGEN_CHECK(a.width >= kWin && a.height >= kWin, "ssim: image smaller than the window");
  const auto ga = a.to_gray();
  const auto gb = b.to_gray();
  const int h = a.height, w = a.width;

  std::vector<double> gaa(ga.size()), gbb(gb.size()), gab(ga.size());
  for (size_t i = 0; i < ga.size(); ++i) {
    gaa[i] = ga[i] * ga[i];
    gbb[i] = gb[i] * gb[i];
    gab[i] = ga[i] * gb[i];
  }
  const auto mu1 = win_conv(ga, h, w);
  const auto mu2 = win_conv(gb, h, w);
  const auto m11 = win_conv(gaa, h, w);
  const auto m22 = win_conv(gbb, h, w);
  const auto m12 = win_conv(gab, h, w);
  double total = 0;
  for (size_t i = 0; i < mu1.size(); ++i) {
    const double s1 = m11[i] - mu1[i] * mu1[i];
    const double s2 = m22[i] - mu2[i] * mu2[i];
    const double s12 = m12[i] - mu1[i] * mu2[i];
    const double num = (2 * mu1[i] * mu2[i] + kC1) * (2 * s12 + kC2);
    const double den = (mu1[i] * mu1[i] + mu2[i] * mu2[i] + kC1) * (s1 + s2 + kC2);
    total += num / den;
  }
  return total / mu1.size();
}

Tensor ssim_loss(const Tensor& gray, const std::vector<double>& target_gray, int h, int w) {
  REVGEN_CHECK(gray.cols() == 1 && gray.rows() == h * w, "ssim_loss: expects [H*W,1] gray");
  REVGEN_CHECK(target_gray.size() == (size_t)h * w, "ssim_loss: target size mismatch");
  REVGEN_CHECK(h >= kWin && w >= kWin, "ssim_loss: image smaller than the window");
  const auto& win = ssim_window();
  Tensor target = Tensor::from_data(h * w, 1, target_gray);

  Tensor mu1 = conv2d_fixed(gray, h, w, win, kWin);
  Tensor mu2 = conv2d_fixed(target, h, w, win, kWin);
  Tensor m11 = conv2d_fixed(mul(gray, gray), h, w, win, kWin);
  Tensor m22 = conv2d_fixed(mul(target, target), h, w, win, kWin);
  Tensor m12 = conv2d_fixed(mul(gray, target), h, w, win, kWin);
  Tensor s1 = sub(m11, mul(mu1, mu1));
  Tensor s2 = sub(m22, mul(mu2, mu2));
  Tensor s12 = sub(m12, mul(mu1, mu2));
  Tensor num = mul(add_scalar(scale(mul(mu1, mu2), 2.0), kC1), add_scalar(scale(s12, 2.0), kC2));
  Tensor den =
      mul(add_scalar(add(mul(mu1, mu1), mul(mu2, mu2)), kC1), add_scalar(add(s1, s2), kC2));
  Tensor ssim_map = div(num, den);
  return add_scalar(scale(mean_all(ssim_map), -1.0), 1.0);  // 1 - SSIM
}

// ---------------------------------------------------------------------------
// Point-cloud metrics

namespace {

// Uniform-grid nearest-neighbor index with ring search; exact because rings
// are visited until the lower bound exceeds the best distance found.
class GridIndex {
 public:
  explicit GridIndex(const PointCloud& pts) : pts_(pts) {
    REVGEN_CHECK(!pts.empty(), "GridIndex: empty cloud");
    lo_ = pts[0];
    Vec3 hi = pts[0];
    for (const auto& p : pts) {
      lo_.x = std::min(lo_.x, p.x);
      lo_.y = std::min(lo_.y, p.y);
      lo_.z = std::min(lo_.z, p.z);
      hi.x = std::max(hi.x, p.x);
      hi.y = std::max(hi.y, p.y);
      hi.z = std::max(hi.z, p.z);
    }
    const double extent = std::max({hi.x - lo_.x, hi.y - lo_.y, hi.z - lo_.z, 1e-9});
    dims_ = std::max(1, std::min(32, static_cast<int>(std::cbrt((double)pts.size()))));
    h_ = extent / dims_ + 1e-12;
    cells_.assign((size_t)dims_ * dims_ * dims_, {});
    for (size_t i = 0; i < pts.size(); ++i) cells_[cell_of(pts[i])].push_back(static_cast<int>(i));
  }

  double nearest_dist(const Vec3& q) const {
    int cx, cy, cz;
    cell_coords(q, cx, cy, cz);
    double best = 1e300;
    for (int ring = 0;; ++ring) {
      if (ring > 0 && (ring - 1) * h_ > best) break;
      if (ring > 2 * dims_) break;
      bool any_cell = false;
      for (int z = cz - ring; z <= cz + ring; ++z)
        for (int y = cy - ring; y <= cy + ring; ++y)
          for (int x = cx - ring; x <= cx + ring; ++x) {
            if (std::max({std::abs(x - cx), std::abs(y - cy), std::abs(z - cz)}) != ring) continue;
            if (x < 0 || y < 0 || z < 0 || x >= dims_ || y >= dims_ || z >= dims_) continue;
            any_cell = true;
            for (int i : cells_[((size_t)z * dims_ + y) * dims_ + x]) {
              const double d = (pts_[i] - q).norm();
              best = std::min(best, d);
            }
          }
      if (!any_cell && ring > 2 * dims_) break;
    }
    return best;
  }

 private:
  size_t cell_of(const Vec3& p) const {
    int x, y, z;
    cell_coords(p, x, y, z);
    return ((size_t)z * dims_ + y) * dims_ + x;
  }
  void cell_coords(const Vec3& p, int& x, int& y, int& z) const {
    x = std::clamp(static_cast<int>((p.x - lo_.x) / h_), 0, dims_ - 1);
    y = std::clamp(static_cast<int>((p.y - lo_.y) / h_), 0, dims_ - 1);
    z = std::clamp(static_cast<int>((p.z - lo_.z) / h_), 0, dims_ - 1);
  }

  const PointCloud& pts_;
  Vec3 lo_;
  double h_ = 1;
  int dims_ = 1;
  std::vector<std::vector<int>> cells_;
};

double directed_mean_nn(const PointCloud& from, const GridIndex& to_index) {
  double s = 0;
  for (const auto& p : from) s += to_index.nearest_dist(p);
  return s / from.size();
}

}  // namespace

double chamfer(const PointCloud& a, const PointCloud& b) {
  REVGEN_CHECK(!a.empty() && !b.empty(), "chamfer: empty cloud");
  GridIndex ia(a), ib(b);
  return 0.5 * (directed_mean_nn(a, ib) + directed_mean_nn(b, ia));
}

double fscore(const PointCloud& a, const PointCloud& b, double r) {
  REVGEN_CHECK(!a.empty() && !b.empty(), "fscore: empty cloud");
  GridIndex ia(a), ib(b);
  int pa = 0, pb = 0;
  for (const auto& p : a) pa += ib.nearest_dist(p) < r;
  for (const auto& p : b) pb += ia.nearest_dist(p) < r;
  const double precision = static_cast<double>(pa) / a.size();
  const double recall = static_cast<double>(pb) / b.size();
  if (precision + recall <= 0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

PointCloud sample_surface(const VoxelObject& obj, int n, uint64_t seed) {
  REVGEN_CHECK(obj.occupied_count() > 0, "sample_surface: empty object");
  struct Face {
    int x, y, z, axis, dir;
  };
  std::vector<Face> faces;
  const int R = obj.resolution;
  const int dx[6] = {1, -1, 0, 0, 0, 0};
  const int dy[6] = {0, 0, 1, -1, 0, 0};
  const int dz[6] = {0, 0, 0, 0, 1, -1};
  for (int z = 0; z < R; ++z)
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x) {
        if (!obj.occupied(x, y, z)) continue;
        for (int f = 0; f < 6; ++f) {
          const int nx = x + dx[f], ny = y + dy[f], nz = z + dz[f];
          const bool open = nx < 0 || ny < 0 || nz < 0 || nx >= R || ny >= R || nz >= R ||
                            !obj.occupied(nx, ny, nz);
          if (open) faces.push_back({x, y, z, f / 2, f % 2 == 0 ? 1 : -1});
        }
      }
  RngStream rng(seed, "sample_surface");
  PointCloud out;
  out.reserve(n);
  const double h = obj.cell_size();
  for (int i = 0; i < n; ++i) {
    const Face& f = faces[rng.uniform_index(faces.size())];
    Vec3 c = obj.cell_center(f.x, f.y, f.z);
    const double u = rng.uniform(-0.5, 0.5) * h;
    const double v = rng.uniform(-0.5, 0.5) * h;
    Vec3 p = c;
    if (f.axis == 0) {
      p.x += f.dir * h / 2;
      p.y += u;
      p.z += v;
    } else if (f.axis == 1) {
      p.y += f.dir * h / 2;
      p.x += u;
      p.z += v;
    } else {
      p.z += f.dir * h / 2;
      p.x += u;
      p.y += v;
    }
    out.push_back(p);
  }
  return out;
}

PoseMetrics pose_metrics(const std::vector<Camera>& pred, const std::vector<Camera>& gt) {
  REVGEN_CHECK(pred.size() == gt.size(), "pose_metrics: list length mismatch");
  REVGEN_CHECK(pred.size() >= 2, "pose_metrics: need at least 2 views");
  const int n = static_cast<int>(pred.size());

  auto relative = [](const std::vector<Camera>& cams, std::vector<Mat3>& rots,
                     std::vector<Vec3>& centers) {
    const Mat3 r1 = cams[0].rotation();
    const Vec3 c1 = cams[0].center();
    for (size_t i = 1; i < cams.size(); ++i) {
      rots.push_back(cams[i].rotation() * r1.transposed());
      centers.push_back(r1 * (cams[i].center() - c1));
    }
  };
  std::vector<Mat3> rp, rg;
  std::vector<Vec3> cp, cg;
  relative(pred, rp, cp);
  relative(gt, rg, cg);

  auto normalize = [](std::vector<Vec3>& v) {
    double mean = 0;
    for (const auto& x : v) mean += x.norm();
    mean /= v.size();
    if (mean > 1e-12)
      for (auto& x : v) x = x / mean;
  };
  normalize(cp);
  normalize(cg);

  PoseMetrics m;
  int a15 = 0, a30 = 0;
  for (int i = 0; i < n - 1; ++i) {
    const double rre = rotation_geodesic_deg(rp[i], rg[i]);
    m.per_view_rre.push_back(rre);
    m.rre_deg += rre;
    a15 += rre < 15.0;
    a30 += rre < 30.0;
    m.te += (cp[i] - cg[i]).norm();
  }
  m.rre_deg /= (n - 1);
  m.te /= (n - 1);
  m.acc15 = static_cast<double>(a15) / (n - 1);
  m.acc30 = static_cast<double>(a30) / (n - 1);
  return m;
}

}  // namespace revgen
