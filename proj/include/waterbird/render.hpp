/* Copyright 2026 The Waterbird Count Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "waterbird/detection.hpp"
#include "waterbird/errors.hpp"
#include "waterbird/image.hpp"

namespace waterbird {

using Color = std::array<std::uint8_t, 3>;  // B, G, R

/// Sixteen well-separated colors, one per trained class; wraps for more.
inline const std::array<Color, 16>& class_palette() {
  static const std::array<Color, 16> kPalette = {{
      {75, 25, 230},   {75, 180, 60},   {25, 225, 255}, {200, 130, 0},
      {48, 130, 245},  {180, 30, 145},  {240, 240, 70}, {230, 50, 240},
      {60, 245, 210},  {212, 190, 250}, {128, 128, 0},  {255, 190, 220},
      {40, 110, 170},  {0, 0, 128},     {195, 255, 170}, {128, 0, 0},
  }};
  return kPalette;
}

inline Color class_color(const std::vector<std::string>& classes, const std::string& name) {
  auto it = std::find(classes.begin(), classes.end(), name);
  std::size_t i = it == classes.end() ? classes.size() : static_cast<std::size_t>(it - classes.begin());
  return class_palette()[i % class_palette().size()];
}

struct RenderStyle {
  int thickness = 2;
  bool labels = true;
  int label_scale = 2;
};

namespace detail {

// 3x5 glyphs for score labels, one row per entry, bit 2 = leftmost column.
inline const std::array<std::uint8_t, 5>& glyph(char c) {
  static const std::array<std::array<std::uint8_t, 5>, 11> kDigits = {{
      {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7},
      {5, 5, 7, 1, 1}, {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1},
      {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7}, {0, 0, 0, 0, 2},
  }};
  if (c >= '0' && c <= '9') return kDigits[c - '0'];
  return kDigits[10];
}

inline Image to_color(const Image& src) {
  if (src.channels() >= 3) return src;
  Image out(src.width(), src.height(), 3);
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      const auto v = src.pixel(x, y)[0];
      auto px = out.pixel(x, y);
      px[0] = px[1] = px[2] = v;
    }
  }
  return out;
}

inline void put(Image& img, int x, int y, const Color& color) {
  if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return;
  auto px = img.pixel(x, y);
  std::copy(color.begin(), color.end(), px.begin());
}

inline void fill_rect(Image& img, int x0, int y0, int x1, int y1, const Color& color) {
  for (int y = std::max(y0, 0); y < std::min(y1, img.height()); ++y) {
    for (int x = std::max(x0, 0); x < std::min(x1, img.width()); ++x) put(img, x, y, color);
  }
}

inline void draw_text(Image& img, int x, int y, const std::string& text, int scale,
                      const Color& color) {
  for (char c : text) {
    const auto& g = glyph(c);
    for (int row = 0; row < 5; ++row) {
      for (int col = 0; col < 3; ++col) {
        if (g[row] & (4 >> col)) {
          fill_rect(img, x + col * scale, y + row * scale, x + (col + 1) * scale,
                    y + (row + 1) * scale, color);
        }
      }
    }
    x += 4 * scale;
  }
}

}  // namespace detail

/// Pixel rectangle covered by a continuous box: columns floor(x_min) up to
/// ceil(x_max) - 1, likewise for rows.
struct PixelRect {
  int x0, y0, x1, y1;  // inclusive
};

inline PixelRect pixel_rect(const BoundingBox& b) {
  return {static_cast<int>(std::floor(b.x_min())), static_cast<int>(std::floor(b.y_min())),
          static_cast<int>(std::ceil(b.x_max())) - 1, static_cast<int>(std::ceil(b.y_max())) - 1};
}

/// Draws each image-frame detection as a class-colored outline (inside the
/// box) with its score printed above the top-left corner, or just inside the
/// box when there is no room above. Grayscale input is promoted to 3
/// channels; all other pixels are copied unchanged.
inline Image render_overlay(const Image& image, const std::vector<Detection>& detections,
                            const std::vector<std::string>& classes, const RenderStyle& style = {}) {
  Image out = detail::to_color(image);
  for (const auto& d : detections) {
    if (d.frame != Frame::image) throw MixedFrames();
    const Color color = class_color(classes, d.class_name);
    const PixelRect r = pixel_rect(d.box);
    const int t = std::max(1, style.thickness);
    detail::fill_rect(out, r.x0, r.y0, r.x1 + 1, r.y0 + t, color);
    detail::fill_rect(out, r.x0, r.y1 - t + 1, r.x1 + 1, r.y1 + 1, color);
    detail::fill_rect(out, r.x0, r.y0, r.x0 + t, r.y1 + 1, color);
    detail::fill_rect(out, r.x1 - t + 1, r.y0, r.x1 + 1, r.y1 + 1, color);
    if (style.labels) {
      char text[16];
      std::snprintf(text, sizeof text, "%.2f", d.score);
      const int h = 5 * style.label_scale;
      const int y = r.y0 - h - 1 >= 0 ? r.y0 - h - 1 : r.y0 + t + 1;
      detail::draw_text(out, r.x0, y, text, style.label_scale, color);
    }
  }
  return out;
}

}  // namespace waterbird
