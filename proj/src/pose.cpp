// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/pose.hpp"

#include <algorithm>
#include <cmath>

#include "revgen/common.hpp"
#include "revgen/rng.hpp"

namespace revgen {

namespace {

// --- small dense symmetric eigensolver (cyclic Jacobi), used by the 12x12
// DLT normal matrix. Returns the eigenvector of the smallest eigenvalue.
std::vector<double> smallest_eigenvector(std::vector<double> a, int n) {
  std::vector<double> v((size_t)n * n, 0.0);
  for (int i = 0; i < n; ++i) v[(size_t)i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += std::abs(a[(size_t)p * n + q]);
    if (off < 1e-13) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[(size_t)p * n + q];
        if (std::abs(apq) < 1e-16) continue;
        const double theta = (a[(size_t)q * n + q] - a[(size_t)p * n + p]) / (2 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[(size_t)k * n + p], akq = a[(size_t)k * n + q];
          a[(size_t)k * n + p] = c * akp - s * akq;
          a[(size_t)k * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[(size_t)p * n + k], aqk = a[(size_t)q * n + k];
          a[(size_t)p * n + k] = c * apk - s * aqk;
          a[(size_t)q * n + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v[(size_t)k * n + p], vkq = v[(size_t)k * n + q];
          v[(size_t)k * n + p] = c * vkp - s * vkq;
          v[(size_t)k * n + q] = s * vkp + c * vkq;
        }
      }
  }
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (a[(size_t)i * n + i] < a[(size_t)best * n + best]) best = i;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = v[(size_t)i * n + best];
  return out;
}

Mat3 skew(const Vec3& w) {
  Mat3 s;
  s(0, 0) = 0;
  s(0, 1) = -w.z;
  s(0, 2) = w.y;
  s(1, 0) = w.z;
  s(1, 1) = 0;
  s(1, 2) = -w.x;
  s(2, 0) = -w.y;
  s(2, 1) = w.x;
  s(2, 2) = 0;
  return s;
}

Mat3 so3_exp(const Vec3& w) {
  const double theta = w.norm();
  if (theta < 1e-12) {
    Mat3 r = Mat3::identity() + skew(w);
    return orthonormalize_rotation(r);
  }
  const Vec3 axis = w / theta;
  return rotation_about_axis(axis, theta);
}

double reproj_error(const Mat3& r, const Vec3& t, const Camera& K, const Correspondence& c) {
  Vec3 p = r * c.point + t;
  if (p.z <= 1e-9) return 1e9;
  const double u = K.fx() * p.x / p.z + K.cx();
  const double v = K.fy() * p.y / p.z + K.cy();
  return std::sqrt((u - c.u) * (u - c.u) + (v - c.v) * (v - c.v));
}

// Gauss-Newton on the inlier set. Returns final RMS.
double gauss_newton(const std::vector<Correspondence>& corrs, const std::vector<int>& inliers,
                    const Camera& K, Mat3& r, Vec3& t, int iters) {
  auto total_err = [&](const Mat3& rr, const Vec3& tt) {
    double s = 0;
    for (int i : inliers) {
      const double e = reproj_error(rr, tt, K, corrs[i]);
      s += e * e;
    }
    return s;
  };
  double err = total_err(r, t);
  for (int it = 0; it < iters; ++it) {
    double jtj[36] = {0};
    double jtr[6] = {0};
    for (int idx : inliers) {
      const auto& c = corrs[idx];
      Vec3 p = r * c.point + t;
      if (p.z <= 1e-9) continue;
      const double iz = 1.0 / p.z;
      const double u = K.fx() * p.x * iz + K.cx();
      const double v = K.fy() * p.y * iz + K.cy();
      const double ru = u - c.u, rv = v - c.v;
      // d(u,v)/dp_cam
      const double du_dp[3] = {K.fx() * iz, 0, -K.fx() * p.x * iz * iz};
      const double dv_dp[3] = {0, K.fy() * iz, -K.fy() * p.y * iz * iz};
      // dp/d(omega) = -skew(p - t)  (left perturbation of R), dp/dt = I
      const Vec3 rp = p - t;
      const double dp_dw[3][3] = {{0, rp.z, -rp.y}, {-rp.z, 0, rp.x}, {rp.y, -rp.x, 0}};
      double ju[6], jv[6];
      for (int a = 0; a < 3; ++a) {
        ju[a] = du_dp[0] * dp_dw[0][a] + du_dp[1] * dp_dw[1][a] + du_dp[2] * dp_dw[2][a];
        jv[a] = dv_dp[0] * dp_dw[0][a] + dv_dp[1] * dp_dw[1][a] + dv_dp[2] * dp_dw[2][a];
        ju[3 + a] = du_dp[a];
        jv[3 + a] = dv_dp[a];
      }
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) jtj[a * 6 + b] += ju[a] * ju[b] + jv[a] * jv[b];
        jtr[a] += ju[a] * ru + jv[a] * rv;
      }
    }
    for (int a = 0; a < 6; ++a) jtj[a * 6 + a] += 1e-9;
    // Cholesky solve of jtj * d = -jtr.
    double l[36] = {0};
    bool ok = true;
    for (int i = 0; i < 6 && ok; ++i) {
      for (int j = 0; j <= i; ++j) {
        double s = jtj[i * 6 + j];
        for (int k = 0; k < j; ++k) s -= l[i * 6 + k] * l[j * 6 + k];
        if (i == j) {
          if (s <= 0) {
            ok = false;
            break;
          }
          l[i * 6 + i] = std::sqrt(s);
        } else {
          l[i * 6 + j] = s / l[j * 6 + j];
        }
      }
    }
    if (!ok) break;
    double y[6], d[6];
    for (int i = 0; i < 6; ++i) {
      double s = -jtr[i];
      for (int k = 0; k < i; ++k) s -= l[i * 6 + k] * y[k];
      y[i] = s / l[i * 6 + i];
    }
    for (int i = 5; i >= 0; --i) {
      double s = y[i];
      for (int k = i + 1; k < 6; ++k) s -= l[k * 6 + i] * d[k];
      d[i] = s / l[i * 6 + i];
    }
    // Step with halving so refinement never increases the inlier error.
    double step = 1.0;
    bool improved = false;
    for (int half = 0; half < 8; ++half, step *= 0.5) {
      Mat3 r_new = so3_exp(Vec3{d[0] * step, d[1] * step, d[2] * step}) * r;
      r_new = orthonormalize_rotation(r_new);
      Vec3 t_new = t + Vec3{d[3] * step, d[4] * step, d[5] * step};
      const double err_new = total_err(r_new, t_new);
      if (err_new <= err) {
        r = r_new;
        t = t_new;
        err = err_new;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return inliers.empty() ? 0.0 : std::sqrt(err / (inliers.size()));
}

struct Corner {
  int x, y;
  double response;
};

// Harris over the color structure tensor: the toy palette separates regions
// by hue at nearly constant luma, so grayscale gradients miss most edges.
std::vector<Corner> harris_corners(const ImageBuffer& img, const MatchConfig& cfg) {
  const int h = img.height, w = img.width;
  std::vector<double> sxx((size_t)h * w, 0.0), syy((size_t)h * w, 0.0), sxy((size_t)h * w, 0.0);
  for (int c = 0; c < 3; ++c) {
    for (int y = 1; y < h - 1; ++y)
      for (int x = 1; x < w - 1; ++x) {
        const auto at = [&](int yy, int xx) { return img.at(yy, xx, c); };
        const double gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1) -
                           at(y - 1, x - 1) - 2 * at(y, x - 1) - at(y + 1, x - 1)) /
                          8.0;
        const double gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1) -
                           at(y - 1, x - 1) - 2 * at(y - 1, x) - at(y - 1, x + 1)) /
                          8.0;
        sxx[(size_t)y * w + x] += gx * gx;
        syy[(size_t)y * w + x] += gy * gy;
        sxy[(size_t)y * w + x] += gx * gy;
      }
  }
  // 5x5 window over the summed tensor, then the Harris response.
  std::vector<double> resp((size_t)h * w, 0.0);
  double max_resp = 0.0;
  for (int y = 2; y < h - 2; ++y)
    for (int x = 2; x < w - 2; ++x) {
      double wxx = 0, wyy = 0, wxy = 0;
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          wxx += sxx[(size_t)(y + dy) * w + (x + dx)];
          wyy += syy[(size_t)(y + dy) * w + (x + dx)];
          wxy += sxy[(size_t)(y + dy) * w + (x + dx)];
        }
      const double det = wxx * wyy - wxy * wxy;
      const double tr = wxx + wyy;
      resp[(size_t)y * w + x] = det - 0.04 * tr * tr;
      max_resp = std::max(max_resp, resp[(size_t)y * w + x]);
    }
  std::vector<Corner> corners;
  if (max_resp <= 0) return corners;
  const double thresh = cfg.corner_rel_threshold * max_resp;
  for (int y = 2; y < h - 2; ++y)
    for (int x = 2; x < w - 2; ++x) {
      const double r = resp[(size_t)y * w + x];
      if (r < thresh) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (resp[(size_t)(y + dy) * w + (x + dx)] > r) {
            is_max = false;
            break;
          }
        }
      if (is_max) corners.push_back({x, y, r});
    }
  std::sort(corners.begin(), corners.end(), [](const Corner& a, const Corner& b) {
    if (a.response != b.response) return a.response > b.response;
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  if (static_cast<int>(corners.size()) > cfg.max_corners) corners.resize(cfg.max_corners);
  return corners;
}

// Normalized cross-correlation of color patch windows centered at two
// corners; returns -2 if either window leaves the image.
double ncc_patch(const ImageBuffer& a, const ImageBuffer& b, const Corner& ca, const Corner& cb,
                 int patch) {
  const int h = a.height, w = a.width;
  const int r = patch / 2;
  if (ca.x < r || ca.y < r || ca.x >= w - r || ca.y >= h - r) return -2;
  if (cb.x < r || cb.y < r || cb.x >= w - r || cb.y >= h - r) return -2;
  double ma = 0, mb = 0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      for (int c = 0; c < 3; ++c) {
        ma += a.at(ca.y + dy, ca.x + dx, c);
        mb += b.at(cb.y + dy, cb.x + dx, c);
      }
  const int n = patch * patch * 3;
  ma /= n;
  mb /= n;
  double num = 0, va = 0, vb = 0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      for (int c = 0; c < 3; ++c) {
        const double xa = a.at(ca.y + dy, ca.x + dx, c) - ma;
        const double xb = b.at(cb.y + dy, cb.x + dx, c) - mb;
        num += xa * xb;
        va += xa * xa;
        vb += xb * xb;
      }
  if (va < 1e-12 || vb < 1e-12) return -2;
  return num / std::sqrt(va * vb);
}

}  // namespace

ViewSet anchor_render(const VoxelObject& obj, int k, uint64_t seed, int image_size) {
  REVGEN_CHECK(obj.occupied_count() > 0, "anchor_render: empty object");
  REVGEN_CHECK(k >= 1, "anchor_render: k must be >= 1");
  ViewSet vs;
  vs.cameras = sample_cameras_sphere(k, seed, image_size);
  RenderConfig rc;
  for (const auto& cam : vs.cameras) {
    RenderOutput out = render(obj, cam, image_size, rc);
    vs.images.push_back(out.rgb);
    vs.depths.push_back(out.depth);
  }
  return vs;
}

std::vector<Camera> coarse_pose(const ViewSet& inputs, const ViewSet& anchors,
                                const EncoderModel& encoder) {
  const int na = anchors.count();
  REVGEN_CHECK(na >= 3, "coarse_pose: insufficient anchors (need >= 3)");
  REVGEN_CHECK(static_cast<int>(anchors.cameras.size()) == na,
               "coarse_pose: anchors need ground-truth cameras");

  std::vector<ImageBuffer> all_views;
  for (const auto& img : anchors.images) all_views.push_back(img);
  for (const auto& img : inputs.images) all_views.push_back(img);
  std::vector<CameraPrediction> preds = encoder.predict_cameras(all_views);
  const int image_size = inputs.images.empty() ? anchors.images[0].width : inputs.images[0].width;
  return align_predictions_to_anchors(preds, anchors, inputs.count(), image_size);
}

std::vector<Camera> align_predictions_to_anchors(const std::vector<CameraPrediction>& preds,
                                                 const ViewSet& anchors, int ni, int image_size) {
  const int na = anchors.count();
  REVGEN_CHECK(na >= 3, "coarse_pose: insufficient anchors (need >= 3)");
  REVGEN_CHECK(static_cast<int>(preds.size()) == na + ni,
               "align_predictions_to_anchors: prediction count mismatch");

  // Rotation of the similarity: minimize sum ||R_gt_i - Rhat_i * Ra||_F.
  Mat3 acc;
  std::fill(acc.m.begin(), acc.m.end(), 0.0);
  for (int i = 0; i < na; ++i)
    acc = acc + preds[i].rotation.transposed() * anchors.cameras[i].rotation();
  const Mat3 r_align = orthonormalize_rotation(acc);

  // Scale + offset between predicted centers (in the prediction frame) and
  // the known anchor centers mapped through r_align.
  std::vector<Vec3> chat(na), cknown(na);
  Vec3 mean_hat{0, 0, 0}, mean_known{0, 0, 0};
  for (int i = 0; i < na; ++i) {
    chat[i] = preds[i].rotation.transposed() * (preds[i].translation * -1.0);
    cknown[i] = anchors.cameras[i].center();
    mean_hat = mean_hat + chat[i];
    mean_known = mean_known + cknown[i];
  }
  mean_hat = mean_hat / na;
  mean_known = mean_known / na;
  // Centers map by a similarity in the world frame: c_world ~ s*(Ra^T chat)+b.
  double num = 0, den = 0;
  std::vector<Vec3> chat_rot(na);
  Vec3 mean_rot{0, 0, 0};
  for (int i = 0; i < na; ++i) {
    chat_rot[i] = r_align.transposed() * chat[i];
    mean_rot = mean_rot + chat_rot[i];
  }
  mean_rot = mean_rot / na;
  for (int i = 0; i < na; ++i) {
    Vec3 dh = chat_rot[i] - mean_rot;
    Vec3 dk = cknown[i] - mean_known;
    num += dh.dot(dk);
    den += dh.dot(dh);
  }
  const double s = den > 1e-12 ? num / den : 1.0;
  const Vec3 offset = mean_known - (mean_rot * s);

  std::vector<Camera> out;
  for (int i = 0; i < ni; ++i) {
    const auto& p = preds[na + i];
    Mat3 r_world = orthonormalize_rotation(p.rotation * r_align);
    Vec3 c_pred = p.rotation.transposed() * (p.translation * -1.0);
    Vec3 c_world = (r_align.transposed() * c_pred) * s + offset;
    Vec3 t_world = (r_world * c_world) * -1.0;
    const double f = std::max(1e-3, p.focal_norm) * image_size;
    out.push_back(Camera(f, f, image_size / 2.0, image_size / 2.0, image_size, image_size,
                         r_world, t_world));
  }
  return out;
}

std::vector<Match> match_images(const ImageBuffer& rendered, const ImageBuffer& input,
                                const MatchConfig& cfg) {
  REVGEN_CHECK(rendered.width == input.width && rendered.height == input.height,
               "match_images: resolution mismatch");
  const auto ca = harris_corners(rendered, cfg);
  const auto cb = harris_corners(input, cfg);
  std::vector<Match> out;
  if (ca.empty() || cb.empty()) return out;

  const int nb = static_cast<int>(cb.size());
  std::vector<int> best_for_b(nb, -1);
  std::vector<double> best_ncc_b(nb, -2.0);
  std::vector<int> best_for_a(ca.size(), -1);
  std::vector<double> best_ncc_a(ca.size(), -2.0);
  for (size_t i = 0; i < ca.size(); ++i) {
    for (int j = 0; j < nb; ++j) {
      const double v = ncc_patch(rendered, input, ca[i], cb[j], cfg.patch);
      if (v > best_ncc_a[i]) {
        best_ncc_a[i] = v;
        best_for_a[i] = j;
      }
      if (v > best_ncc_b[j]) {
        best_ncc_b[j] = v;
        best_for_b[j] = static_cast<int>(i);
      }
    }
  }
  for (size_t i = 0; i < ca.size(); ++i) {
    const int j = best_for_a[i];
    if (j < 0 || best_ncc_a[i] < cfg.ncc_threshold) continue;
    if (best_for_b[j] != static_cast<int>(i)) continue;  // mutual best only
    Match m{ca[i].x, ca[i].y, cb[j].x, cb[j].y, best_ncc_a[i]};
    // Sub-pixel peak of the NCC surface around the integer match (1-D
    // parabola fits per axis).
    auto ncc_at = [&](int dx, int dy) {
      Corner shifted{cb[j].x + dx, cb[j].y + dy, 0.0};
      return ncc_patch(rendered, input, ca[i], shifted, cfg.patch);
    };
    const double c0 = m.ncc;
    const double cxm = ncc_at(-1, 0), cxp = ncc_at(1, 0);
    const double cym = ncc_at(0, -1), cyp = ncc_at(0, 1);
    m.sub_bx = m.bx;
    m.sub_by = m.by;
    if (cxm > -1.5 && cxp > -1.5) {
      const double denom = cxm - 2 * c0 + cxp;
      if (denom < -1e-12) m.sub_bx += std::clamp(0.5 * (cxm - cxp) / denom, -0.5, 0.5);
    }
    if (cym > -1.5 && cyp > -1.5) {
      const double denom = cym - 2 * c0 + cyp;
      if (denom < -1e-12) m.sub_by += std::clamp(0.5 * (cym - cyp) / denom, -0.5, 0.5);
    }
    out.push_back(m);
  }
  return out;
}

std::vector<Correspondence> lift_matches(const std::vector<Match>& matches,
                                         const std::vector<double>& anchor_depth,
                                         const Camera& anchor_camera) {
  std::vector<Correspondence> out;
  const int w = anchor_camera.width();
  for (const auto& m : matches) {
    const double d = anchor_depth[(size_t)m.ay * w + m.ax];
    if (d <= 0) continue;  // background pixel
    Correspondence c;
    c.point = anchor_camera.unproject(m.ax + 0.5, m.ay + 0.5, d);
    const bool has_subpixel = m.sub_bx != 0 || m.sub_by != 0;
    c.u = (has_subpixel ? m.sub_bx : m.bx) + 0.5;
    c.v = (has_subpixel ? m.sub_by : m.by) + 0.5;
    c.score = std::max(0.0, std::min(1.0, m.ncc));
    out.push_back(c);
  }
  return out;
}

bool pnp_dlt(const std::vector<Correspondence>& corrs, const Camera& K, Mat3& rot, Vec3& trans) {
  const int n = static_cast<int>(corrs.size());
  if (n < 6) return false;
  // Normalized image coordinates remove the intrinsics.
  std::vector<double> ata(144, 0.0);
  auto accumulate_row = [&](const double* row) {
    for (int a = 0; a < 12; ++a)
      for (int b = 0; b < 12; ++b) ata[(size_t)a * 12 + b] += row[a] * row[b];
  };
  for (const auto& c : corrs) {
    const double xn = (c.u - K.cx()) / K.fx();
    const double yn = (c.v - K.cy()) / K.fy();
    const double X = c.point.x, Y = c.point.y, Z = c.point.z;
    const double r1[12] = {X, Y, Z, 1, 0, 0, 0, 0, -xn * X, -xn * Y, -xn * Z, -xn};
    const double r2[12] = {0, 0, 0, 0, X, Y, Z, 1, -yn * X, -yn * Y, -yn * Z, -yn};
    accumulate_row(r1);
    accumulate_row(r2);
  }
  std::vector<double> p = smallest_eigenvector(ata, 12);
  Mat3 m;
  m(0, 0) = p[0];
  m(0, 1) = p[1];
  m(0, 2) = p[2];
  m(1, 0) = p[4];
  m(1, 1) = p[5];
  m(1, 2) = p[6];
  m(2, 0) = p[8];
  m(2, 1) = p[9];
  m(2, 2) = p[10];
  Vec3 p4{p[3], p[7], p[11]};
  const double det = m.det();
  if (std::abs(det) < 1e-18) return false;
  if (det < 0) {
    m = m.scaled(-1.0);
    p4 = p4 * -1.0;
  }
  Mat3 u, v;
  Vec3 sv;
  svd3(m, u, sv, v);
  const double scale = (sv.x + sv.y + sv.z) / 3.0;
  if (scale < 1e-12) return false;
  rot = orthonormalize_rotation(m);
  trans = p4 / scale;
  // Majority of points must land in front of the camera.
  int front = 0;
  for (const auto& c : corrs) front += (rot * c.point + trans).z > 0;
  if (front * 2 < n) {
    // A projective sign flip of this form is not rigid; reject.
    return false;
  }
  return true;
}

PoseEstimate pnp_ransac(const std::vector<Correspondence>& corrs, const Camera& K,
                        const PnPConfig& cfg) {
  const int n = static_cast<int>(corrs.size());
  REVGEN_CHECK(n >= 6, "pnp_ransac: insufficient correspondences (need >= 6)");
  RngStream rng(cfg.seed, "pnp_ransac");

  Mat3 best_r;
  Vec3 best_t;
  int best_inliers = -1;
  for (int it = 0; it < cfg.ransac_iters; ++it) {
    // Sample 6 distinct indices.
    std::vector<int> pick;
    while (static_cast<int>(pick.size()) < 6) {
      const int c = static_cast<int>(rng.uniform_index(n));
      if (std::find(pick.begin(), pick.end(), c) == pick.end()) pick.push_back(c);
    }
    std::vector<Correspondence> sample;
    for (int i : pick) sample.push_back(corrs[i]);
    Mat3 r;
    Vec3 t;
    if (!pnp_dlt(sample, K, r, t)) continue;
    int inl = 0;
    for (const auto& c : corrs) inl += reproj_error(r, t, K, c) < cfg.reproj_threshold_px;
    if (inl > best_inliers) {
      best_inliers = inl;
      best_r = r;
      best_t = t;
    }
  }

  PoseEstimate est;
  if (best_inliers < 6) {
    est.status = PoseStatus::kDegenerate;
    est.inliers = std::max(0, best_inliers);
    return est;
  }
  std::vector<int> inlier_idx;
  for (int i = 0; i < n; ++i)
    if (reproj_error(best_r, best_t, K, corrs[i]) < cfg.reproj_threshold_px)
      inlier_idx.push_back(i);
  double rms = gauss_newton(corrs, inlier_idx, K, best_r, best_t, cfg.gn_iters);
  // Re-collect inliers around the refined pose and polish once more.
  std::vector<int> inlier_idx2;
  for (int i = 0; i < n; ++i)
    if (reproj_error(best_r, best_t, K, corrs[i]) < cfg.reproj_threshold_px)
      inlier_idx2.push_back(i);
  if (inlier_idx2.size() >= 6 && inlier_idx2 != inlier_idx) {
    inlier_idx = inlier_idx2;
    rms = gauss_newton(corrs, inlier_idx, K, best_r, best_t, cfg.gn_iters);
  }

  est.camera = Camera(K.fx(), K.fy(), K.cx(), K.cy(), K.width(), K.height(),
                      orthonormalize_rotation(best_r), best_t);
  est.inliers = static_cast<int>(inlier_idx.size());
  est.reprojection_rms = rms;
  est.status = PoseStatus::kOk;
  return est;
}

namespace {

// Zero-mean correlation of 4x-downsampled luma; used to retrieve anchors that
// look like the input when the coarse pose is unreliable.
std::vector<double> retrieval_signature(const ImageBuffer& img) {
  const auto gray = img.to_gray();
  const int w = img.width, f = 4;
  const int gw = w / f;
  std::vector<double> sig((size_t)gw * gw, 0.0);
  for (int y = 0; y < gw * f; ++y)
    for (int x = 0; x < gw * f; ++x) sig[(size_t)(y / f) * gw + x / f] += gray[(size_t)y * w + x];
  double mean = 0;
  for (double v : sig) mean += v;
  mean /= sig.size();
  double norm = 0;
  for (auto& v : sig) {
    v -= mean;
    norm += v * v;
  }
  norm = std::sqrt(std::max(norm, 1e-12));
  for (auto& v : sig) v /= norm;
  return sig;
}

double signature_ncc(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<PoseEstimate> refine_all(const ViewSet& inputs, const VoxelObject& obj,
                                     const EncoderModel& encoder, const RefineConfig& cfg) {
  const int image_size = inputs.images.empty() ? 64 : inputs.images[0].width;
  ViewSet anchors = anchor_render(obj, cfg.anchor_count, cfg.seed, image_size);
  std::vector<Camera> coarse;
  try {
    coarse = coarse_pose(inputs, anchors, encoder);
  } catch (const Error&) {
    coarse.clear();
  }
  std::vector<std::vector<double>> anchor_sigs;
  for (const auto& img : anchors.images) anchor_sigs.push_back(retrieval_signature(img));

  RenderConfig rc;
  std::vector<PoseEstimate> out;
  for (int i = 0; i < inputs.count(); ++i) {
    PoseEstimate est;
    est.status = PoseStatus::kFallback;
    if (static_cast<int>(coarse.size()) > i) est.camera = coarse[i];
    try {
      if (coarse.empty()) throw Error("no coarse pose");
      const Camera& cpose = coarse[i];
      std::vector<Correspondence> corrs;
      // Primary: the object rendered from the coarse pose itself.
      {
        RenderOutput r = render(obj, cpose, image_size, rc);
        auto matches = match_images(r.rgb, inputs.images[i], cfg.match);
        auto lifted = lift_matches(matches, r.depth, cpose);
        corrs.insert(corrs.end(), lifted.begin(), lifted.end());
      }
      // Anchors: nearest by coarse viewing direction plus the best
      // appearance matches (the latter rescue poor coarse estimates).
      std::vector<std::pair<double, int>> by_angle, by_appearance;
      const auto input_sig = retrieval_signature(inputs.images[i]);
      for (int a = 0; a < anchors.count(); ++a) {
        by_angle.push_back({1.0 - anchors.cameras[a].view_dir().dot(cpose.view_dir()), a});
        by_appearance.push_back({-signature_ncc(input_sig, anchor_sigs[a]), a});
      }
      std::sort(by_angle.begin(), by_angle.end());
      std::sort(by_appearance.begin(), by_appearance.end());
      std::vector<int> picks;
      for (int k = 0; k < std::min(cfg.anchors_to_match, anchors.count()); ++k)
        picks.push_back(by_angle[k].second);
      for (int k = 0; k < std::min(cfg.anchors_to_match + 2, anchors.count()); ++k)
        picks.push_back(by_appearance[k].second);
      std::sort(picks.begin(), picks.end());
      picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
      for (int a : picks) {
        auto matches = match_images(anchors.images[a], inputs.images[i], cfg.match);
        auto lifted = lift_matches(matches, anchors.depths[a], anchors.cameras[a]);
        corrs.insert(corrs.end(), lifted.begin(), lifted.end());
      }
      if (static_cast<int>(corrs.size()) < 6) {
        // Relax the matcher once before giving up on this view.
        MatchConfig relaxed = cfg.match;
        relaxed.ncc_threshold = 0.55;
        relaxed.corner_rel_threshold = 0.005;
        for (int a : picks) {
          auto matches = match_images(anchors.images[a], inputs.images[i], relaxed);
          auto lifted = lift_matches(matches, anchors.depths[a], anchors.cameras[a]);
          corrs.insert(corrs.end(), lifted.begin(), lifted.end());
        }
      }
      if (static_cast<int>(corrs.size()) < 6) throw Error("too few correspondences");
      PnPConfig pnp_cfg = cfg.pnp;
      pnp_cfg.seed = cfg.seed * 1000003ull + i;
      PoseEstimate solved = pnp_ransac(corrs, cpose, pnp_cfg);
      // Iterate: re-render at the solved pose and match again; the shrinking
      // baseline sharpens the correspondences each round. Rounds accumulate
      // with a relaxed matcher so sparse boxy views still gather enough.
      MatchConfig round_match = cfg.match;
      round_match.ncc_threshold = 0.6;
      round_match.corner_rel_threshold = 0.005;
      std::vector<Correspondence> round_corrs;
      for (int round = 0; round < 3 && solved.status == PoseStatus::kOk; ++round) {
        RenderOutput r = render(obj, *solved.camera, image_size, rc);
        auto matches = match_images(r.rgb, inputs.images[i], round_match);
        auto lifted = lift_matches(matches, r.depth, *solved.camera);
        round_corrs.insert(round_corrs.end(), lifted.begin(), lifted.end());
        if (static_cast<int>(round_corrs.size()) < 6) continue;
        PnPConfig iter_cfg = pnp_cfg;
        iter_cfg.seed = pnp_cfg.seed + 17 * (round + 1);
        PoseEstimate next = pnp_ransac(round_corrs, *solved.camera, iter_cfg);
        if (next.status != PoseStatus::kOk) break;
        solved = next;
      }
      if (solved.status == PoseStatus::kOk) {
        est = solved;
      } else {
        est.status = PoseStatus::kFallback;
      }
    } catch (const Error&) {
      est.status = PoseStatus::kFallback;
    }
    out.push_back(est);
  }
  return out;
}

}  // namespace revgen
