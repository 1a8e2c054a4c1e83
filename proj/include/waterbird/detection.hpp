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

#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "waterbird/errors.hpp"
#include "waterbird/geometry.hpp"
#include "waterbird/taxonomy.hpp"

namespace waterbird {

enum class Frame { tile, image, world };

inline std::string_view to_string(Frame f) {
  switch (f) {
    case Frame::tile: return "tile";
    case Frame::image: return "image";
    case Frame::world: return "world";
  }
  return "unknown";
}

struct Detection {
  std::string class_name;
  BoundingBox box;
  double score = 0.0;
  Frame frame = Frame::tile;
  std::string provenance;  // tile the detection was produced on
  std::string image_id;    // source image; empty in the world frame

  friend bool operator==(const Detection&, const Detection&) = default;
};

inline void validate_score(double score) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw InputError("detection score outside [0, 1]: " + std::to_string(score));
  }
}

/// Total ranking order: higher score first; ties by provenance, then box
/// coordinates, then class, so ranked lists are reproducible.
inline bool ranks_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.provenance, a.image_id, a.box, a.class_name) <
         std::tie(b.provenance, b.image_id, b.box, b.class_name);
}

inline void require_single_frame(const std::vector<Detection>& dets) {
  for (const auto& d : dets) {
    if (d.frame != dets.front().frame) throw MixedFrames();
  }
}

// ---------------------------------------------------------------------------
// Detections wire format: JSON lines, one object per line,
//   {"tile_id": str, "class": str, "x_min": f, "y_min": f, "x_max": f,
//    "y_max": f, "score": f}
// in the tile frame. Image-frame files written after merging carry an extra
// "image_id" key.

struct RejectedDetection {
  std::size_t line;
  std::string class_name;
  std::string reason;
};

struct DetectionFile {
  std::vector<Detection> detections;
  std::vector<RejectedDetection> rejects;
};

namespace detail {

inline double wire_number(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line, std::string("missing key '") + key + "'");
  if (!it->is_number()) throw ParseError(line, std::string("'") + key + "' must be a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ParseError(line, std::string("'") + key + "' is not finite");
  return v;
}

inline std::string wire_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line, std::string("missing key '") + key + "'");
  if (!it->is_string()) throw ParseError(line, std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace detail

/// Parses one wire-format line. Throws ParseError for anything that does not
/// conform: invalid JSON, missing or extra keys, wrong types, a degenerate
/// box, or a score outside [0, 1].
inline Detection parse_detection_line(std::string_view text, std::size_t line) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(line, "expected a JSON object");
  static const std::set<std::string> kKeys = {"tile_id", "class", "x_min", "y_min",
                                              "x_max",   "y_max", "score", "image_id"};
  for (const auto& [key, value] : obj.items()) {
    if (!kKeys.count(key)) throw ParseError(line, "unexpected key '" + key + "'");
  }
  Detection d{detail::wire_string(obj, "class", line),
              BoundingBox(0, 0, 1, 1),
              detail::wire_number(obj, "score", line),
              Frame::tile,
              detail::wire_string(obj, "tile_id", line),
              {}};
  const double x0 = detail::wire_number(obj, "x_min", line);
  const double y0 = detail::wire_number(obj, "y_min", line);
  const double x1 = detail::wire_number(obj, "x_max", line);
  const double y1 = detail::wire_number(obj, "y_max", line);
  if (!(x0 < x1) || !(y0 < y1)) throw ParseError(line, "degenerate box");
  d.box = BoundingBox(x0, y0, x1, y1);
  if (!(d.score >= 0.0 && d.score <= 1.0)) throw ParseError(line, "score outside [0, 1]");
  if (obj.contains("image_id")) {
    d.image_id = detail::wire_string(obj, "image_id", line);
    d.frame = Frame::image;
  }
  return d;
}

/// Reads a detections file. Blank lines are skipped. With a taxonomy, lines
/// whose class is not a trained class are moved to `rejects`.
inline DetectionFile read_detections(std::istream& in, const ClassTaxonomy* taxonomy = nullptr) {
  DetectionFile out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    Detection d = parse_detection_line(text, line);
    if (taxonomy && !taxonomy->contains(d.class_name)) {
      out.rejects.push_back({line, d.class_name, "unknown class"});
      continue;
    }
    out.detections.push_back(std::move(d));
  }
  if (!out.detections.empty()) {
    // A file is either all tile-frame or all image-frame.
    for (const auto& d : out.detections) {
      if (d.frame != out.detections.front().frame) throw MixedFrames();
    }
  }
  return out;
}

/// Writes detections as JSON lines with keys in wire order.
inline void write_detections(std::ostream& out, const std::vector<Detection>& dets) {
  for (const auto& d : dets) {
    // nlohmann::json sorts keys; emit the documented order explicitly.
    out << "{\"tile_id\":" << nlohmann::json(d.provenance).dump()
        << ",\"class\":" << nlohmann::json(d.class_name).dump()
        << ",\"x_min\":" << nlohmann::json(d.box.x_min()).dump()
        << ",\"y_min\":" << nlohmann::json(d.box.y_min()).dump()
        << ",\"x_max\":" << nlohmann::json(d.box.x_max()).dump()
        << ",\"y_max\":" << nlohmann::json(d.box.y_max()).dump()
        << ",\"score\":" << nlohmann::json(d.score).dump();
    if (d.frame != Frame::tile) out << ",\"image_id\":" << nlohmann::json(d.image_id).dump();
    out << "}\n";
  }
}

}  // namespace waterbird
