// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace revgen {

// Row-major HWC image, values in [0,1], 3 (RGB) or 4 (RGBA) channels.
struct ImageBuffer {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<double> values;

  static ImageBuffer make(int height, int width, int channels, double fill = 0.0);
  double& at(int y, int x, int c) { return values[((size_t)y * width + x) * channels + c]; }
  double at(int y, int x, int c) const { return values[((size_t)y * width + x) * channels + c]; }
  size_t numel() const { return values.size(); }
  // Rec.601 luma of the RGB channels.
  std::vector<double> to_gray() const;
  void validate() const;  // shape/range invariants
};

// 8-bit PNG with no compression (deflate stored blocks). Writing quantizes
// with round(v*255); reading the files written here round-trips those bytes
// exactly. The reader handles all five PNG row filters but only stored
// deflate blocks, which is the subset this project emits.
void save_png(const std::string& path, const ImageBuffer& img);
ImageBuffer load_png(const std::string& path);

}  // namespace revgen
