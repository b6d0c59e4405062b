// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// Just-enough plotting: line plots and bar charts rasterized straight into an
// ImageBuffer with a 5x7 bitmap font. Deterministic output, no dependencies.

#pragma once

#include <string>
#include <vector>

#include "revgen/image.hpp"

namespace revgen {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  double color[3] = {0.1, 0.3, 0.8};
};

void draw_text(ImageBuffer& img, int x, int y, const std::string& text, const double rgb[3],
               int scale = 1);

ImageBuffer line_plot(const std::vector<PlotSeries>& series, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel, int width = 480,
                      int height = 320);

ImageBuffer bar_chart(const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::string& title, const std::string& ylabel, int width = 480,
                      int height = 320);

}  // namespace revgen
