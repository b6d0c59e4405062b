// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/camera.hpp"

#include <algorithm>

#include "revgen/common.hpp"

namespace revgen {

Mat3 Mat3::operator*(const Mat3& o) const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
      r(i, j) = s;
    }
  return r;
}

Mat3 Mat3::operator+(const Mat3& o) const {
  Mat3 r;
  for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
  return r;
}

Mat3 Mat3::operator-(const Mat3& o) const {
  Mat3 r;
  for (int i = 0; i < 9; ++i) r.m[i] = m[i] - o.m[i];
  return r;
}

Mat3 Mat3::scaled(double s) const {
  Mat3 r;
  for (int i = 0; i < 9; ++i) r.m[i] = m[i] * s;
  return r;
}

Mat3 Mat3::transposed() const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
  return r;
}

double Mat3::det() const {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

void sym_eig3(const Mat3& a_in, Mat3& vecs, Vec3& vals) {
  Mat3 a = a_in;
  vecs = Mat3::identity();
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = std::abs(a(0, 1)) + std::abs(a(0, 2)) + std::abs(a(1, 2));
    if (off < 1e-15) break;
    for (int p = 0; p < 3; ++p)
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(a(p, q)) < 1e-18) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        Mat3 rot = Mat3::identity();
        rot(p, p) = c;
        rot(q, q) = c;
        rot(p, q) = s;
        rot(q, p) = -s;
        a = rot.transposed() * a * rot;
        vecs = vecs * rot;
      }
  }
  double ev[3] = {a(0, 0), a(1, 1), a(2, 2)};
  int order[3] = {0, 1, 2};
  std::sort(order, order + 3, [&](int i, int j) { return ev[i] < ev[j]; });
  Mat3 sorted_vecs;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) sorted_vecs(i, j) = vecs(i, order[j]);
  vecs = sorted_vecs;
  vals = {ev[order[0]], ev[order[1]], ev[order[2]]};
}

void svd3(const Mat3& a, Mat3& u, Vec3& s, Mat3& v) {
  // Eigen-decompose A^T A for V and singular values, recover U columns.
  Mat3 ata = a.transposed() * a;
  Mat3 vecs;
  Vec3 vals;
  sym_eig3(ata, vecs, vals);
  // Descending order.
  double sv[3] = {std::sqrt(std::max(0.0, vals.z)), std::sqrt(std::max(0.0, vals.y)),
                  std::sqrt(std::max(0.0, vals.x))};
  Mat3 vdesc;
  for (int i = 0; i < 3; ++i) {
    vdesc(i, 0) = vecs(i, 2);
    vdesc(i, 1) = vecs(i, 1);
    vdesc(i, 2) = vecs(i, 0);
  }
  v = vdesc;
  s = {sv[0], sv[1], sv[2]};
  Vec3 ucols[3];
  for (int j = 0; j < 3; ++j) {
    Vec3 vj{v(0, j), v(1, j), v(2, j)};
    Vec3 av = a * vj;
    if (sv[j] > 1e-12) {
      ucols[j] = av / sv[j];
    } else if (j == 0) {
      ucols[0] = {1, 0, 0};
    } else if (j == 1) {
      Vec3 guess = std::abs(ucols[0].x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
      ucols[1] = ucols[0].cross(guess).normalized();
    } else {
      ucols[2] = ucols[0].cross(ucols[1]).normalized();
    }
  }
  for (int j = 0; j < 3; ++j) {
    u(0, j) = ucols[j].x;
    u(1, j) = ucols[j].y;
    u(2, j) = ucols[j].z;
  }
}

Mat3 orthonormalize_rotation(const Mat3& a) {
  Mat3 u, v;
  Vec3 s;
  svd3(a, u, s, v);
  Mat3 r = u * v.transposed();
  if (r.det() < 0) {
    // Flip the column paired with the smallest singular value.
    for (int i = 0; i < 3; ++i) u(i, 2) = -u(i, 2);
    r = u * v.transposed();
  }
  return r;
}

Mat3 rotation_about_axis(const Vec3& axis, double angle) {
  Vec3 n = axis.normalized();
  double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
  Mat3 r;
  r(0, 0) = t * n.x * n.x + c;
  r(0, 1) = t * n.x * n.y - s * n.z;
  r(0, 2) = t * n.x * n.z + s * n.y;
  r(1, 0) = t * n.x * n.y + s * n.z;
  r(1, 1) = t * n.y * n.y + c;
  r(1, 2) = t * n.y * n.z - s * n.x;
  r(2, 0) = t * n.x * n.z - s * n.y;
  r(2, 1) = t * n.y * n.z + s * n.x;
  r(2, 2) = t * n.z * n.z + c;
  return r;
}

double rotation_geodesic_deg(const Mat3& a, const Mat3& b) {
  Mat3 rel = a * b.transposed();
  double c = (rel.trace() - 1.0) / 2.0;
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c) * 180.0 / 3.14159265358979323846;
}

Camera::Camera(double fx, double fy, double cx, double cy, int width, int height,
               const Mat3& rotation, const Vec3& translation)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), width_(width), height_(height), rot_(rotation),
      t_(translation) {
  REVGEN_CHECK(fx_ > 0 && fy_ > 0, "Camera: focal lengths must be positive");
  REVGEN_CHECK(width_ > 0 && height_ > 0, "Camera: image size must be positive");
  REVGEN_CHECK(cx_ >= 0 && cx_ < width_ && cy_ >= 0 && cy_ < height_,
               "Camera: principal point outside image");
  Mat3 gram = rot_.transposed() * rot_;
  Mat3 err = gram - Mat3::identity();
  double inf = 0;
  for (double e : err.m) inf = std::max(inf, std::abs(e));
  REVGEN_CHECK(inf < 1e-6, "Camera: rotation is not orthonormal");
  REVGEN_CHECK(rot_.det() > 0, "Camera: rotation has negative determinant");
}

Vec3 Camera::center() const {
  // x_cam = R x + t = 0  =>  x = -R^T t
  return rot_.transposed() * (t_ * -1.0);
}

Vec3 Camera::view_dir() const {
  // Camera-frame +z in world coordinates.
  return {rot_(2, 0), rot_(2, 1), rot_(2, 2)};
}

PixelDepth Camera::project(const Vec3& world) const {
  Vec3 c = to_camera(world);
  REVGEN_CHECK(c.z > 0, "project: point behind camera");
  return {fx_ * c.x / c.z + cx_, fy_ * c.y / c.z + cy_, c.z};
}

Vec3 Camera::unproject(double u, double v, double depth) const {
  REVGEN_CHECK(depth > 0, "unproject: invalid depth");
  Vec3 cam{(u - cx_) / fx_ * depth, (v - cy_) / fy_ * depth, depth};
  return rot_.transposed() * (cam - t_);
}

void Camera::pixel_ray(double u, double v, Vec3& origin, Vec3& dir) const {
  origin = center();
  Vec3 cam_dir{(u - cx_) / fx_, (v - cy_) / fy_, 1.0};
  dir = rot_.transposed() * cam_dir;
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, double focal_px, int width,
                       int height) {
  Vec3 fwd = (target - eye).normalized();
  Vec3 up{0, 0, 1};
  if (std::abs(fwd.dot(up)) > 0.999) up = {0, 1, 0};
  Vec3 right = fwd.cross(up).normalized();
  Vec3 down = fwd.cross(right).normalized();  // +v axis points down the image
  Mat3 r;
  r(0, 0) = right.x;
  r(0, 1) = right.y;
  r(0, 2) = right.z;
  r(1, 0) = down.x;
  r(1, 1) = down.y;
  r(1, 2) = down.z;
  r(2, 0) = fwd.x;
  r(2, 1) = fwd.y;
  r(2, 2) = fwd.z;
  Vec3 t = (r * eye) * -1.0;
  return Camera(focal_px, focal_px, width / 2.0, height / 2.0, width, height, r, t);
}

}  // namespace revgen
