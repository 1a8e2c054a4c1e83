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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "waterbird/errors.hpp"

namespace waterbird {

/// 8-bit raster, interleaved channels, row-major, no padding.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, std::uint8_t fill = 0)
      : width_(width), height_(height), channels_(channels) {
    if (width <= 0 || height <= 0 || channels <= 0) {
      throw InputError("image dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }
  Image(int width, int height, int channels, std::vector<std::uint8_t> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (width <= 0 || height <= 0 || channels <= 0 ||
        data_.size() != static_cast<std::size_t>(width) * height * channels) {
      throw DimensionMismatch("pixel buffer does not match image dimensions");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<std::uint8_t> pixel(int x, int y) {
    return {data_.data() + offset(x, y), static_cast<std::size_t>(channels_)};
  }
  std::span<const std::uint8_t> pixel(int x, int y) const {
    return {data_.data() + offset(x, y), static_cast<std::size_t>(channels_)};
  }

  std::span<std::uint8_t> row(int y) {
    return {data_.data() + offset(0, y), static_cast<std::size_t>(width_) * channels_};
  }
  std::span<const std::uint8_t> row(int y) const {
    return {data_.data() + offset(0, y), static_cast<std::size_t>(width_) * channels_};
  }

  const std::vector<std::uint8_t>& data() const noexcept { return data_; }
  std::vector<std::uint8_t>& data() noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Exact pixel copy of the window [x, x+w) x [y, y+h).
inline Image crop(const Image& src, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > src.width() || y + h > src.height()) {
    throw OutOfBounds("crop window outside image");
  }
  Image out(w, h, src.channels());
  const std::size_t row_bytes = static_cast<std::size_t>(w) * src.channels();
  for (int r = 0; r < h; ++r) {
    auto from = src.row(y + r).subspan(static_cast<std::size_t>(x) * src.channels(), row_bytes);
    std::copy(from.begin(), from.end(), out.row(r).begin());
  }
  return out;
}

inline Image mirror_horizontal(const Image& src) {
  Image out(src.width(), src.height(), src.channels());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      auto from = src.pixel(src.width() - 1 - x, y);
      std::copy(from.begin(), from.end(), out.pixel(x, y).begin());
    }
  }
  return out;
}

inline Image mirror_vertical(const Image& src) {
  Image out(src.width(), src.height(), src.channels());
  for (int y = 0; y < src.height(); ++y) {
    auto from = src.row(src.height() - 1 - y);
    std::copy(from.begin(), from.end(), out.row(y).begin());
  }
  return out;
}

/// Quarter turn clockwise (y axis pointing down): output is height x width.
inline Image rotate_clockwise(const Image& src) {
  Image out(src.height(), src.width(), src.channels());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      auto from = src.pixel(y, src.height() - 1 - x);
      std::copy(from.begin(), from.end(), out.pixel(x, y).begin());
    }
  }
  return out;
}

}  // namespace waterbird
