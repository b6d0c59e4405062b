// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>

namespace revgen {

namespace {

// 5x7 glyphs, one bit per pixel, row-major from the top. Covers the
// characters the reports actually print.
struct Glyph {
  char c;
  uint8_t rows[7];
};

constexpr Glyph kGlyphs[] = {
    {' ', {0, 0, 0, 0, 0, 0, 0}},
    {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
    {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
    {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
    {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
    {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
    {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
    {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
    {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0c, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1f, 0x04, 0x04, 0x00}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {':', {0x00, 0x0c, 0x0c, 0x00, 0x0c, 0x0c, 0x00}},
    {'=', {0x00, 0x00, 0x1f, 0x00, 0x1f, 0x00, 0x00}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'%', {0x19, 0x19, 0x02, 0x04, 0x08, 0x13, 0x13}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
    {'A', {0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
    {'B', {0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e}},
    {'C', {0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}},
    {'D', {0x1c, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1c}},
    {'E', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f}},
    {'F', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10}},
    {'G', {0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f}},
    {'H', {0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
    {'I', {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f}},
    {'M', {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
    {'P', {0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10}},
    {'Q', {0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d}},
    {'R', {0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11}},
    {'S', {0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}},
    {'T', {0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1b, 0x11}},
    {'X', {0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f}},
};

const Glyph* find_glyph(char c) {
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  for (const auto& g : kGlyphs)
    if (g.c == c) return &g;
  return nullptr;
}

void put_px(ImageBuffer& img, int x, int y, const double rgb[3]) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  for (int c = 0; c < 3; ++c) img.at(y, x, c) = rgb[c];
}

void draw_line(ImageBuffer& img, int x0, int y0, int x1, int y1, const double rgb[3]) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    put_px(img, x0, y0, rgb);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

std::string format_tick(double v) {
  char buf[32];
  if (std::abs(v) >= 100 || v == std::floor(v))
    std::snprintf(buf, sizeof buf, "%.0f", v);
  else if (std::abs(v) >= 1)
    std::snprintf(buf, sizeof buf, "%.1f", v);
  else
    std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Frame {
  int x0, y0, x1, y1;  // plot area in pixels (y grows down)
  double vx0, vx1, vy0, vy1;
  int px(double v) const {
    return x0 + static_cast<int>((v - vx0) / (vx1 - vx0) * (x1 - x0) + 0.5);
  }
  int py(double v) const {
    return y1 - static_cast<int>((v - vy0) / (vy1 - vy0) * (y1 - y0) + 0.5);
  }
};

constexpr double kBlack[3] = {0.1, 0.1, 0.1};
constexpr double kGrey[3] = {0.75, 0.75, 0.75};

Frame setup_axes(ImageBuffer& img, const std::string& title, const std::string& xlabel,
                 const std::string& ylabel, double vx0, double vx1, double vy0, double vy1) {
  Frame f{56, 28, img.width - 16, img.height - 36, vx0, vx1, vy0, vy1};
  if (f.vx1 - f.vx0 < 1e-12) f.vx1 = f.vx0 + 1;
  if (f.vy1 - f.vy0 < 1e-12) f.vy1 = f.vy0 + 1;
  draw_text(img, (img.width - 6 * (int)title.size()) / 2, 8, title, kBlack);
  draw_text(img, (img.width - 6 * (int)xlabel.size()) / 2, img.height - 12, xlabel, kBlack);
  draw_text(img, 4, 16, ylabel, kBlack);
  draw_line(img, f.x0, f.y0, f.x0, f.y1, kBlack);
  draw_line(img, f.x0, f.y1, f.x1, f.y1, kBlack);
  for (int i = 0; i <= 4; ++i) {
    const double vy = f.vy0 + (f.vy1 - f.vy0) * i / 4;
    const int y = f.py(vy);
    draw_line(img, f.x0 - 3, y, f.x0, y, kBlack);
    if (i > 0) draw_line(img, f.x0 + 1, y, f.x1, y, kGrey);
    const std::string t = format_tick(vy);
    draw_text(img, f.x0 - 5 - 6 * (int)t.size(), y - 3, t, kBlack);
    const double vx = f.vx0 + (f.vx1 - f.vx0) * i / 4;
    const int x = f.px(vx);
    draw_line(img, x, f.y1, x, f.y1 + 3, kBlack);
    const std::string tx = format_tick(vx);
    draw_text(img, x - 3 * (int)tx.size(), f.y1 + 6, tx, kBlack);
  }
  return f;
}

}  // namespace

void draw_text(ImageBuffer& img, int x, int y, const std::string& text, const double rgb[3],
               int scale) {
  int cx = x;
  for (char ch : text) {
    const Glyph* g = find_glyph(ch);
    if (g) {
      for (int gy = 0; gy < 7; ++gy)
        for (int gx = 0; gx < 5; ++gx)
          if (g->rows[gy] & (1 << (4 - gx)))
            for (int sy = 0; sy < scale; ++sy)
              for (int sx = 0; sx < scale; ++sx)
                put_px(img, cx + gx * scale + sx, y + gy * scale + sy, rgb);
    }
    cx += 6 * scale;
  }
}

ImageBuffer line_plot(const std::vector<PlotSeries>& series, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel, int width,
                      int height) {
  ImageBuffer img = ImageBuffer::make(height, width, 3, 1.0);
  double vx0 = 1e300, vx1 = -1e300, vy0 = 1e300, vy1 = -1e300;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      vx0 = std::min(vx0, s.x[i]);
      vx1 = std::max(vx1, s.x[i]);
      vy0 = std::min(vy0, s.y[i]);
      vy1 = std::max(vy1, s.y[i]);
    }
  if (vx0 > vx1) {
    vx0 = 0;
    vx1 = 1;
    vy0 = 0;
    vy1 = 1;
  }
  const double pad = 0.05 * (vy1 - vy0 + 1e-9);
  Frame f = setup_axes(img, title, xlabel, ylabel, vx0, vx1, vy0 - pad, vy1 + pad);
  int legend_y = f.y0 + 4;
  for (const auto& s : series) {
    for (size_t i = 1; i < s.x.size(); ++i)
      draw_line(img, f.px(s.x[i - 1]), f.py(s.y[i - 1]), f.px(s.x[i]), f.py(s.y[i]), s.color);
    for (size_t i = 0; i < s.x.size(); ++i) {
      const int x = f.px(s.x[i]), y = f.py(s.y[i]);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) put_px(img, x + dx, y + dy, s.color);
    }
    if (!s.label.empty()) {
      draw_line(img, f.x1 - 90, legend_y + 3, f.x1 - 78, legend_y + 3, s.color);
      draw_text(img, f.x1 - 74, legend_y, s.label, kBlack);
      legend_y += 10;
    }
  }
  return img;
}

ImageBuffer bar_chart(const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::string& title, const std::string& ylabel, int width, int height) {
  ImageBuffer img = ImageBuffer::make(height, width, 3, 1.0);
  double vy1 = 0;
  for (double v : values) vy1 = std::max(vy1, v);
  Frame f = setup_axes(img, title, "", ylabel, 0, static_cast<double>(values.size()), 0,
                       vy1 * 1.1 + 1e-9);
  const double bar[3] = {0.25, 0.45, 0.75};
  for (size_t i = 0; i < values.size(); ++i) {
    const int xa = f.px(i + 0.2), xb = f.px(i + 0.8);
    const int yb = f.py(0.0), ya = f.py(values[i]);
    for (int x = xa; x <= xb; ++x)
      for (int y = ya; y <= yb; ++y) put_px(img, x, y, bar);
    const std::string v = format_tick(values[i]);
    draw_text(img, (xa + xb) / 2 - 3 * (int)v.size(), ya - 10, v, kBlack);
    if (i < labels.size())
      draw_text(img, (xa + xb) / 2 - 3 * (int)labels[i].size(), yb + 6, labels[i], kBlack);
  }
  return img;
}

}  // namespace revgen
