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

// Synthetic survey data for tests.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unistd.h>
#include <string>
#include <vector>

#include "waterbird/dataset.hpp"
#include "waterbird/geometry.hpp"
#include "waterbird/image.hpp"
#include "waterbird/random.hpp"
#include "waterbird/raster_io.hpp"

namespace waterbird::testing {

inline BoundingBox random_box(Rng& rng, double frame_w, double frame_h, double min_side,
                              double max_side) {
  const double w = rng.uniform(min_side, max_side);
  const double h = rng.uniform(min_side, max_side);
  const double x = rng.uniform(0.0, frame_w - w);
  const double y = rng.uniform(0.0, frame_h - h);
  return BoundingBox(x, y, x + w, y + h);
}

/// `n` pairwise-disjoint integer-aligned birds (with a small gap) inside a
/// width x height image, classes cycling through `classes`.
inline std::vector<Annotation> synthetic_birds(std::size_t n, int width, int height,
                                               int min_side, int max_side,
                                               const std::vector<std::string>& classes,
                                               std::uint64_t seed,
                                               const std::string& image_id = "img") {
  Rng rng(seed);
  std::vector<Annotation> out;
  std::size_t attempts = 0;
  while (out.size() < n) {
    if (++attempts > 200000) throw std::runtime_error("cannot place birds; image too crowded");
    const int w = min_side + static_cast<int>(rng.below(max_side - min_side + 1));
    const int h = min_side + static_cast<int>(rng.below(max_side - min_side + 1));
    const int x = static_cast<int>(rng.below(width - w + 1));
    const int y = static_cast<int>(rng.below(height - h + 1));
    const BoundingBox padded(x - 2, y - 2, x + w + 2, y + h + 2);
    bool clear = true;
    for (const auto& a : out) {
      if (intersect(a.box, padded)) {
        clear = false;
        break;
      }
    }
    if (!clear) continue;
    out.push_back({image_id, classes[out.size() % classes.size()], BoundingBox(x, y, x + w, y + h)});
  }
  return out;
}

/// A raster with a textured background and each bird painted as a solid
/// block whose color depends on its index.
inline Image paint_survey(int width, int height, const std::vector<Annotation>& birds,
                          int channels = 3) {
  Image img(width, height, channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      auto px = img.pixel(x, y);
      for (int c = 0; c < channels; ++c) {
        px[c] = static_cast<std::uint8_t>(60 + ((x * 7 + y * 13 + c * 31) % 40));
      }
    }
  }
  for (std::size_t i = 0; i < birds.size(); ++i) {
    const auto& b = birds[i].box;
    for (int y = static_cast<int>(b.y_min()); y < static_cast<int>(b.y_max()); ++y) {
      for (int x = static_cast<int>(b.x_min()); x < static_cast<int>(b.x_max()); ++x) {
        auto px = img.pixel(x, y);
        for (int c = 0; c < channels; ++c) {
          px[c] = static_cast<std::uint8_t>(150 + (i * 37 + c * 53) % 100);
        }
      }
    }
  }
  return img;
}

inline void write_annotation_csv(const std::filesystem::path& path,
                                 const std::vector<Annotation>& anns) {
  std::ofstream out(path);
  out << "image_id,class_name,x_min,y_min,x_max,y_max\n";
  for (const auto& a : anns) {
    out << a.image_id << ',' << a.class_name << ',' << a.box.x_min() << ',' << a.box.y_min()
        << ',' << a.box.x_max() << ',' << a.box.y_max() << '\n';
  }
}

/// Fresh scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("waterbird_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct Survey {
  std::vector<Annotation> annotations;  // per-image coordinates, as in the CSV
  std::size_t distinct_birds = 0;       // birds on the ground
};

/// Two overlapping georeferenced survey images on disk: images/a.png and
/// images/b.png (1400x1000 each, 0.1 m pixels, b starts 70 m east of a) with
/// world files, plus annotations.csv. Birds are placed on a 2100 px wide
/// mosaic, so those in the shared strip appear in both images.
inline Survey write_survey(const std::filesystem::path& root, std::uint64_t seed = 1,
                           std::size_t n = 100) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "images");
  const std::vector<std::string> classes{
      "Laughing Gull Adult", "Brown Pelican Adult", "White Ibis Adult", "Mixed Tern Adult",
      "Black Skimmer Adult", "Roseate Spoonbill Adult", "Great Egret Adult", "Mixed Egret"};
  Survey survey;
  std::vector<Annotation> mosaic;
  for (auto& a : synthetic_birds(n, 2100, 1000, 12, 90, classes, seed, "mosaic")) {
    const bool straddles = (a.box.x_min() < 700 && a.box.x_max() > 700) ||
                           (a.box.x_min() < 1400 && a.box.x_max() > 1400);
    if (!straddles) mosaic.push_back(std::move(a));
  }
  survey.distinct_birds = mosaic.size();
  for (const auto& [id, x0] : {std::pair<std::string, int>{"a", 0}, {"b", 700}}) {
    std::vector<Annotation> birds;
    for (const auto& a : mosaic) {
      if (a.box.x_min() >= x0 && a.box.x_max() <= x0 + 1400) {
        birds.push_back({id, a.class_name,
                         BoundingBox(a.box.x_min() - x0, a.box.y_min(), a.box.x_max() - x0,
                                     a.box.y_max())});
      }
    }
    write_png(paint_survey(1400, 1000, birds), (root / "images" / (id + ".png")).string());
    std::ofstream wf(root / "images" / (id + ".pgw"));
    wf.precision(17);
    wf << "0.1\n0\n0\n-0.1\n" << 500000.05 + 0.1 * x0 << "\n3299999.95\n";
    survey.annotations.insert(survey.annotations.end(), birds.begin(), birds.end());
  }
  write_annotation_csv(root / "annotations.csv", survey.annotations);
  return survey;
}

}  // namespace waterbird::testing
