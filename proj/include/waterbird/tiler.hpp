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
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "waterbird/dataset.hpp"
#include "waterbird/errors.hpp"
#include "waterbird/geometry.hpp"
#include "waterbird/image.hpp"

namespace waterbird {

/// Sliding-window geometry. The defaults are 640x640 tiles shifted by 400 px
/// in both axes, keeping clipped boxes that retain more than 80% of their area.
struct TilePlan {
  int tile_width = 640;
  int tile_height = 640;
  int stride_x = 400;
  int stride_y = 400;
  double retention_threshold = 0.8;

  void validate() const {
    if (tile_width <= 0 || tile_height <= 0) throw InputError("tile size must be positive");
    if (stride_x <= 0 || stride_x > tile_width || stride_y <= 0 || stride_y > tile_height) {
      throw InputError("stride must be in (0, tile size]");
    }
    if (!(retention_threshold > 0.0) || retention_threshold > 1.0) {
      throw InputError("retention threshold must be in (0, 1]");
    }
  }

  friend bool operator==(const TilePlan&, const TilePlan&) = default;
};

struct TileOffset {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const TileOffset&, const TileOffset&) = default;
};

/// Where an augmented tile came from.
struct TileProvenance {
  std::string source_tile;
  std::string op;
  double brightness_delta = 0.0;
  double contrast = 1.0;
  friend bool operator==(const TileProvenance&, const TileProvenance&) = default;
};

struct TileRecord {
  std::string tile_id;
  std::string image_id;
  TileOffset offset;
  int width = 0;
  int height = 0;
  AffineTransform to_source;  // tile frame -> source image frame
  std::vector<Annotation> annotations;  // tile frame; image_id == tile_id
  std::string path;  // tile raster, relative to the manifest directory
  std::optional<TileProvenance> provenance;

  bool background() const noexcept { return annotations.empty(); }
  BoundingBox bounds() const { return BoundingBox(0, 0, width, height); }
  friend bool operator==(const TileRecord&, const TileRecord&) = default;
};

inline std::string make_tile_id(const std::string& image_id, int x, int y) {
  return image_id + "_" + std::to_string(x) + "_" + std::to_string(y);
}

/// Window origins along one axis: multiples of stride while the window fits,
/// then one final window flush with the far edge if the grid stopped short.
inline std::vector<int> axis_offsets(int extent, int tile, int stride) {
  if (extent < tile) {
    throw ImageSmallerThanTile("image extent " + std::to_string(extent) +
                               " is smaller than tile size " + std::to_string(tile));
  }
  std::vector<int> out;
  for (long long o = 0; o + tile <= extent; o += stride) out.push_back(static_cast<int>(o));
  if (out.back() + tile < extent) out.push_back(extent - tile);
  return out;
}

/// Tile origins, row-major (y outer, x inner). Every pixel of the image is
/// covered and every window lies inside the image.
inline std::vector<TileOffset> plan_tiles(const SurveyImage& image, const TilePlan& plan) {
  plan.validate();
  if (image.width < plan.tile_width || image.height < plan.tile_height) {
    throw ImageSmallerThanTile("image " + image.image_id + " (" + std::to_string(image.width) +
                               "x" + std::to_string(image.height) + ") is smaller than a " +
                               std::to_string(plan.tile_width) + "x" +
                               std::to_string(plan.tile_height) + " tile");
  }
  const auto xs = axis_offsets(image.width, plan.tile_width, plan.stride_x);
  const auto ys = axis_offsets(image.height, plan.tile_height, plan.stride_y);
  std::vector<TileOffset> out;
  out.reserve(xs.size() * ys.size());
  for (int y : ys) {
    for (int x : xs) out.push_back({x, y});
  }
  return out;
}

/// Keeps boxes whose area inside `window` is strictly more than `threshold`
/// of their own area, clips them to the window and moves them into the
/// window's frame. Output annotations carry `tile_id` as their image id.
inline std::vector<Annotation> clip_annotations(const BoundingBox& window,
                                                std::span<const Annotation> annotations,
                                                double threshold,
                                                const std::string& tile_id = {}) {
  std::vector<Annotation> out;
  for (const auto& a : annotations) {
    auto inside = intersect(a.box, window);
    if (!inside) continue;
    if (!(inside->area() / a.box.area() > threshold)) continue;
    out.push_back({tile_id, a.class_name,
                   BoundingBox(inside->x_min() - window.x_min(), inside->y_min() - window.y_min(),
                               inside->x_max() - window.x_min(),
                               inside->y_max() - window.y_min())});
  }
  return out;
}

/// Tile records (geometry plus clipped annotations) for one source image.
inline std::vector<TileRecord> make_tile_records(const SurveyImage& image,
                                                 std::span<const Annotation> annotations,
                                                 const TilePlan& plan) {
  std::vector<TileRecord> out;
  for (const auto& off : plan_tiles(image, plan)) {
    TileRecord rec;
    rec.tile_id = make_tile_id(image.image_id, off.x, off.y);
    rec.image_id = image.image_id;
    rec.offset = off;
    rec.width = plan.tile_width;
    rec.height = plan.tile_height;
    rec.to_source = AffineTransform::translation(off.x, off.y);
    const BoundingBox window(off.x, off.y, off.x + plan.tile_width, off.y + plan.tile_height);
    rec.annotations = clip_annotations(window, annotations, plan.retention_threshold, rec.tile_id);
    rec.path = "tiles/" + rec.tile_id + ".png";
    out.push_back(std::move(rec));
  }
  return out;
}

/// Streams (record, pixels) for every planned tile without holding all tiles
/// in memory. Pixels are an exact copy of the source window.
inline void for_each_tile(const Image& pixels, const SurveyImage& image,
                          std::span<const Annotation> annotations, const TilePlan& plan,
                          const std::function<void(const TileRecord&, const Image&)>& visit) {
  if (pixels.width() != image.width || pixels.height() != image.height) {
    throw DimensionMismatch("image " + image.image_id + " decodes to " +
                            std::to_string(pixels.width()) + "x" +
                            std::to_string(pixels.height()) + ", expected " +
                            std::to_string(image.width) + "x" + std::to_string(image.height));
  }
  for (const auto& rec : make_tile_records(image, annotations, plan)) {
    visit(rec, crop(pixels, rec.offset.x, rec.offset.y, rec.width, rec.height));
  }
}

struct ExtractedTile {
  TileRecord record;
  Image pixels;
};

inline std::vector<ExtractedTile> extract_tiles(const Image& pixels, const SurveyImage& image,
                                                std::span<const Annotation> annotations,
                                                const TilePlan& plan) {
  std::vector<ExtractedTile> out;
  for_each_tile(pixels, image, annotations, plan,
                [&](const TileRecord& rec, const Image& tile) { out.push_back({rec, tile}); });
  return out;
}

// ---------------------------------------------------------------------------
// Tiles manifest

struct TileManifest {
  TilePlan plan;
  std::vector<SurveyImage> images;
  std::vector<TileRecord> tiles;

  const TileRecord* find(const std::string& tile_id) const {
    for (const auto& t : tiles) {
      if (t.tile_id == tile_id) return &t;
    }
    return nullptr;
  }

  std::map<std::string, const TileRecord*> index() const {
    std::map<std::string, const TileRecord*> out;
    for (const auto& t : tiles) out.emplace(t.tile_id, &t);
    return out;
  }

  const SurveyImage* image(const std::string& image_id) const {
    for (const auto& i : images) {
      if (i.image_id == image_id) return &i;
    }
    return nullptr;
  }

  std::vector<Annotation> all_annotations() const {
    std::vector<Annotation> out;
    for (const auto& t : tiles) out.insert(out.end(), t.annotations.begin(), t.annotations.end());
    return out;
  }
};

inline nlohmann::json box_to_json(const BoundingBox& b) {
  return {{"x_min", b.x_min()}, {"y_min", b.y_min()}, {"x_max", b.x_max()}, {"y_max", b.y_max()}};
}

inline BoundingBox box_from_json(const nlohmann::json& j) {
  return BoundingBox(j.at("x_min").get<double>(), j.at("y_min").get<double>(),
                     j.at("x_max").get<double>(), j.at("y_max").get<double>());
}

inline nlohmann::json transform_to_json(const AffineTransform& t) {
  const auto c = t.coefficients();
  return nlohmann::json(std::vector<double>(c.begin(), c.end()));
}

inline AffineTransform transform_from_json(const nlohmann::json& j) {
  const auto c = j.get<std::vector<double>>();
  if (c.size() != 6) throw ParseError(0, "affine transform needs 6 coefficients");
  return AffineTransform(c[0], c[1], c[2], c[3], c[4], c[5]);
}

inline nlohmann::json to_json(const TileManifest& m) {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& i : m.images) {
    nlohmann::json ij = {{"image_id", i.image_id},
                         {"path", i.path},
                         {"width", i.width},
                         {"height", i.height}};
    if (i.georeference) ij["georeference"] = transform_to_json(*i.georeference);
    images.push_back(std::move(ij));
  }
  nlohmann::json tiles = nlohmann::json::array();
  for (const auto& t : m.tiles) {
    nlohmann::json anns = nlohmann::json::array();
    for (const auto& a : t.annotations) {
      auto aj = box_to_json(a.box);
      aj["class"] = a.class_name;
      anns.push_back(std::move(aj));
    }
    nlohmann::json tj = {{"tile_id", t.tile_id},
                         {"image_id", t.image_id},
                         {"offset", {t.offset.x, t.offset.y}},
                         {"width", t.width},
                         {"height", t.height},
                         {"to_source", transform_to_json(t.to_source)},
                         {"path", t.path},
                         {"background", t.background()},
                         {"annotations", std::move(anns)}};
    if (t.provenance) {
      tj["provenance"] = {{"source_tile", t.provenance->source_tile},
                          {"op", t.provenance->op},
                          {"brightness_delta", t.provenance->brightness_delta},
                          {"contrast", t.provenance->contrast}};
    }
    tiles.push_back(std::move(tj));
  }
  return {{"version", 1},
          {"tile_plan",
           {{"tile_width", m.plan.tile_width},
            {"tile_height", m.plan.tile_height},
            {"stride_x", m.plan.stride_x},
            {"stride_y", m.plan.stride_y},
            {"retention_threshold", m.plan.retention_threshold}}},
          {"images", std::move(images)},
          {"tiles", std::move(tiles)}};
}

inline TileManifest manifest_from_json(const nlohmann::json& j) {
  TileManifest m;
  try {
    const auto& p = j.at("tile_plan");
    m.plan.tile_width = p.at("tile_width").get<int>();
    m.plan.tile_height = p.at("tile_height").get<int>();
    m.plan.stride_x = p.at("stride_x").get<int>();
    m.plan.stride_y = p.at("stride_y").get<int>();
    m.plan.retention_threshold = p.at("retention_threshold").get<double>();
    for (const auto& ij : j.at("images")) {
      SurveyImage img;
      img.image_id = ij.at("image_id").get<std::string>();
      img.path = ij.value("path", std::string{});
      img.width = ij.at("width").get<int>();
      img.height = ij.at("height").get<int>();
      if (ij.contains("georeference")) img.georeference = transform_from_json(ij["georeference"]);
      m.images.push_back(std::move(img));
    }
    for (const auto& tj : j.at("tiles")) {
      TileRecord t;
      t.tile_id = tj.at("tile_id").get<std::string>();
      t.image_id = tj.at("image_id").get<std::string>();
      t.offset = {tj.at("offset").at(0).get<int>(), tj.at("offset").at(1).get<int>()};
      t.width = tj.at("width").get<int>();
      t.height = tj.at("height").get<int>();
      t.to_source = transform_from_json(tj.at("to_source"));
      t.path = tj.value("path", std::string{});
      for (const auto& aj : tj.at("annotations")) {
        t.annotations.push_back({t.tile_id, aj.at("class").get<std::string>(), box_from_json(aj)});
      }
      if (tj.contains("provenance")) {
        const auto& pj = tj["provenance"];
        t.provenance = TileProvenance{pj.at("source_tile").get<std::string>(),
                                      pj.at("op").get<std::string>(),
                                      pj.value("brightness_delta", 0.0), pj.value("contrast", 1.0)};
      }
      m.tiles.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("manifest: ") + e.what());
  }
  return m;
}

inline std::string dump_manifest(const TileManifest& m) { return to_json(m).dump(2) + "\n"; }

inline void save_manifest(const TileManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write manifest: " + path);
  out << dump_manifest(m);
}

inline TileManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, path + ": " + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace waterbird
