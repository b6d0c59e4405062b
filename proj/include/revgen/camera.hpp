// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Pinhole camera with world-to-camera rigid extrinsics, plus the small fixed
// size linear algebra the geometry code leans on.

#pragma once

#include <array>
#include <cmath>

namespace revgen {

struct Vec3 {
  double x = 0, y = 0, z = 0;
  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const { return *this / norm(); }
};

struct Mat3 {
  // Row-major.
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};
  static Mat3 identity() { return {}; }
  double& operator()(int r, int c) { return m[r * 3 + c]; }
  double operator()(int r, int c) const { return m[r * 3 + c]; }
  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator*(const Mat3& o) const;
  Mat3 operator+(const Mat3& o) const;
  Mat3 operator-(const Mat3& o) const;
  Mat3 scaled(double s) const;
  Mat3 transposed() const;
  double trace() const { return m[0] + m[4] + m[8]; }
  double det() const;
};

// Symmetric eigen-decomposition by cyclic Jacobi; eigenvalues ascending.
void sym_eig3(const Mat3& a, Mat3& vecs, Vec3& vals);
// SVD a = U diag(s) V^T with s descending.
void svd3(const Mat3& a, Mat3& u, Vec3& s, Mat3& v);
// Nearest rotation (polar factor with det +1).
Mat3 orthonormalize_rotation(const Mat3& a);
// Axis-angle (radians) from rotation matrix / to rotation matrix.
Mat3 rotation_about_axis(const Vec3& axis, double angle);
double rotation_geodesic_deg(const Mat3& a, const Mat3& b);

struct PixelDepth {
  double u = 0, v = 0, depth = 0;
};

class Camera {
 public:
  // rotation: world-to-camera; translation: camera-frame offset so that
  // x_cam = R * x_world + t. Throws if R is not a proper rotation or the
  // intrinsics are out of range.
  Camera(double fx, double fy, double cx, double cy, int width, int height, const Mat3& rotation,
         const Vec3& translation);

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const Mat3& rotation() const { return rot_; }
  const Vec3& translation() const { return t_; }

  Vec3 to_camera(const Vec3& world) const { return rot_ * world + t_; }
  Vec3 center() const;                  // camera position in world frame
  Vec3 view_dir() const;                // optical axis in world frame
  // Pinhole projection; throws on non-positive depth.
  PixelDepth project(const Vec3& world) const;
  // Inverse of project; throws on depth <= 0.
  Vec3 unproject(double u, double v, double depth) const;
  // World-space ray through a pixel, parameterized by camera-frame depth z:
  // point(z) = origin + z * dir, with dir scaled so z is the pinhole depth.
  void pixel_ray(double u, double v, Vec3& origin, Vec3& dir) const;

  // Look-at constructor used across the toy world: camera at `eye` looking at
  // `target` with +y-ish up, fov given as focal in pixels.
  static Camera look_at(const Vec3& eye, const Vec3& target, double focal_px, int width,
                        int height);

 private:
  double fx_, fy_, cx_, cy_;
  int width_, height_;
  Mat3 rot_;
  Vec3 t_;
};

}  // namespace revgen
