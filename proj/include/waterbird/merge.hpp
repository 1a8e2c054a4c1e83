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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "waterbird/detection.hpp"
#include "waterbird/errors.hpp"
#include "waterbird/geometry.hpp"
#include "waterbird/taxonomy.hpp"
#include "waterbird/tiler.hpp"

namespace waterbird {

/// Maps tile-frame detections into their source images. Boxes are first
/// clipped to the tile (detectors may emit boxes that spill past the border);
/// a box with no area inside its tile is dropped. Scores and classes are
/// unchanged.
inline std::vector<Detection> back_project(const std::vector<Detection>& detections,
                                           const TileManifest& manifest) {
  const auto index = manifest.index();
  std::vector<Detection> out;
  out.reserve(detections.size());
  for (const auto& d : detections) {
    if (d.frame != Frame::tile) throw MixedFrames();
    auto it = index.find(d.provenance);
    if (it == index.end()) throw UnknownTile(d.provenance);
    const TileRecord& tile = *it->second;
    auto inside = intersect(d.box, tile.bounds());
    if (!inside) continue;
    Detection p = d;
    p.box = apply_transform(tile.to_source, *inside);
    p.frame = Frame::image;
    p.image_id = tile.image_id;
    out.push_back(std::move(p));
  }
  return out;
}

inline std::map<std::string, std::vector<Detection>> group_by_image(
    const std::vector<Detection>& detections) {
  std::map<std::string, std::vector<Detection>> out;
  for (const auto& d : detections) out[d.image_id].push_back(d);
  return out;
}

struct NmsOptions {
  double iou_threshold = 0.5;
  bool class_aware = true;
};

/// Greedy non-maximum suppression. Detections are visited in ranking order
/// (ranks_before); each survives unless a previously kept detection (of the
/// same class when class_aware) overlaps it with IoU strictly above the
/// threshold. Returns the survivors in ranking order.
///
/// Kept boxes are bucketed on a uniform grid whose cell is the largest box
/// side, so a candidate is only compared against kept boxes sharing a cell.
inline std::vector<Detection> nms(std::vector<Detection> detections, const NmsOptions& opt = {}) {
  if (detections.empty()) return detections;
  require_single_frame(detections);
  std::sort(detections.begin(), detections.end(), ranks_before);

  double cell = 0.0;
  for (const auto& d : detections) cell = std::max({cell, d.box.width(), d.box.height()});
  auto cell_of = [cell](double v) { return static_cast<std::int64_t>(std::floor(v / cell)); };
  auto key = [](std::int64_t cx, std::int64_t cy) {
    return (static_cast<std::uint64_t>(cx) << 32) ^ static_cast<std::uint64_t>(cy & 0xffffffff);
  };

  std::unordered_map<std::uint64_t, std::vector<std::size_t>> grid;
  std::vector<Detection> kept;
  for (auto& d : detections) {
    const auto cx0 = cell_of(d.box.x_min()), cx1 = cell_of(d.box.x_max());
    const auto cy0 = cell_of(d.box.y_min()), cy1 = cell_of(d.box.y_max());
    bool suppressed = false;
    for (auto cx = cx0; cx <= cx1 && !suppressed; ++cx) {
      for (auto cy = cy0; cy <= cy1 && !suppressed; ++cy) {
        auto it = grid.find(key(cx, cy));
        if (it == grid.end()) continue;
        for (std::size_t k : it->second) {
          const Detection& other = kept[k];
          if (opt.class_aware && other.class_name != d.class_name) continue;
          if (iou(other.box, d.box) > opt.iou_threshold) {
            suppressed = true;
            break;
          }
        }
      }
    }
    if (suppressed) continue;
    for (auto cx = cx0; cx <= cx1; ++cx) {
      for (auto cy = cy0; cy <= cy1; ++cy) grid[key(cx, cy)].push_back(kept.size());
    }
    kept.push_back(std::move(d));
  }
  return kept;
}

struct CountReport {
  std::string scope;
  std::vector<std::pair<std::string, std::size_t>> counts;  // taxonomy order
  std::size_t total = 0;
  double nms_threshold = 0.5;
  double score_floor = 0.5;

  std::size_t operator[](const std::string& class_name) const {
    for (const auto& [c, n] : counts) {
      if (c == class_name) return n;
    }
    return 0;
  }
};

/// Per-class counts of detections scoring at least `score_floor`. Every class
/// in `classes` appears (zero when absent); classes outside the list are
/// appended in name order.
inline CountReport count(const std::vector<Detection>& detections,
                         const std::vector<std::string>& classes, double score_floor = 0.5,
                         std::string scope = {}, double nms_threshold = 0.5) {
  std::map<std::string, std::size_t> tally;
  for (const auto& d : detections) {
    if (d.score >= score_floor) ++tally[d.class_name];
  }
  CountReport r;
  r.scope = std::move(scope);
  r.score_floor = score_floor;
  r.nms_threshold = nms_threshold;
  for (const auto& c : classes) {
    auto it = tally.find(c);
    r.counts.emplace_back(c, it == tally.end() ? 0 : it->second);
    if (it != tally.end()) tally.erase(it);
  }
  for (const auto& [c, n] : tally) r.counts.emplace_back(c, n);
  for (const auto& [c, n] : r.counts) r.total += n;
  return r;
}

inline void write_counts_csv(std::ostream& out, const std::vector<CountReport>& reports) {
  out << "scope,class,count\n";
  for (const auto& r : reports) {
    for (const auto& [c, n] : r.counts) out << r.scope << ',' << c << ',' << n << '\n';
  }
}

inline nlohmann::json to_json(const CountReport& r) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [c, n] : r.counts) counts[c] = n;
  return {{"scope", r.scope},
          {"counts", counts},
          {"total", r.total},
          {"nms_threshold", r.nms_threshold},
          {"score_floor", r.score_floor}};
}

/// Reads a world file: six numbers, one per line, in the order
/// A (x scale), D, B, E (y scale), C, F (world coordinates of the centre of
/// the top-left pixel). Returns the transform for continuous pixel
/// coordinates, where the top-left pixel spans [0,1) x [0,1).
inline AffineTransform parse_world_file(std::istream& in) {
  double v[6];
  for (int i = 0; i < 6; ++i) {
    if (!(in >> v[i])) throw ParseError(static_cast<std::size_t>(i + 1), "world file needs 6 numbers");
  }
  const double a = v[0], d = v[1], b = v[2], e = v[3], c = v[4], f = v[5];
  return AffineTransform(a, b, c - 0.5 * a - 0.5 * b, d, e, f - 0.5 * d - 0.5 * e);
}

inline AffineTransform load_world_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open world file: " + path);
  try {
    return parse_world_file(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": world file needs 6 numbers");
  }
}

struct MissionResult {
  std::vector<Detection> detections;  // world frame, after NMS
  CountReport report;
};

/// Maps every image's (already de-duplicated) detections into the world frame
/// through its georeference, then suppresses cross-image duplicates there.
inline MissionResult merge_mission(
    const std::map<std::string, std::vector<Detection>>& per_image,
    const std::map<std::string, AffineTransform>& georeferences,
    const std::vector<std::string>& classes, const NmsOptions& opt = {},
    double score_floor = 0.5, std::string mission_id = "mission") {
  std::vector<Detection> world;
  for (const auto& [image_id, dets] : per_image) {
    auto it = georeferences.find(image_id);
    if (it == georeferences.end()) throw MissingGeoreference(image_id);
    for (const auto& d : dets) {
      if (d.frame != Frame::image) throw MixedFrames();
      Detection w = d;
      w.box = apply_transform(it->second, d.box);
      w.frame = Frame::world;
      w.image_id = image_id;
      world.push_back(std::move(w));
    }
  }
  MissionResult out;
  out.detections = nms(std::move(world), opt);
  out.report = count(out.detections, classes, score_floor, std::move(mission_id), opt.iou_threshold);
  return out;
}

}  // namespace waterbird
