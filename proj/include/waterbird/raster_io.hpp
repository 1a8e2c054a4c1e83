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

// Raster decode/encode. Reads anything OpenCV's codecs read (PNG, JPEG,
// TIFF); writes lossless PNG. Pixels are kept in OpenCV's BGR(A) order, which
// is all the pipeline needs since it never interprets color semantics beyond
// the overlay palette (also BGR).

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "waterbird/errors.hpp"
#include "waterbird/image.hpp"

namespace waterbird {

inline Image read_image(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DecodeError("no such image: " + path);
  cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw DecodeError("cannot decode image: " + path);
  if (mat.depth() != CV_8U) {
    cv::Mat converted;
    mat.convertTo(converted, CV_8U, mat.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
    mat = converted;
  }
  if (!mat.isContinuous()) mat = mat.clone();
  std::vector<std::uint8_t> data(mat.datastart, mat.dataend);
  return Image(mat.cols, mat.rows, mat.channels(), std::move(data));
}

/// Width and height without keeping the decoded pixels around.
inline std::pair<int, int> image_size(const std::string& path) {
  const Image img = read_image(path);
  return {img.width(), img.height()};
}

inline void write_png(const Image& img, const std::string& path) {
  if (img.empty()) throw InvariantViolation("refusing to write an empty image: " + path);
  const cv::Mat mat(img.height(), img.width(), CV_8UC(img.channels()),
                    const_cast<std::uint8_t*>(img.data().data()));
  const std::vector<int> params = {cv::IMWRITE_PNG_COMPRESSION, 3};
  if (!cv::imwrite(path, mat, params)) throw InputError("cannot write image: " + path);
}

}  // namespace waterbird
