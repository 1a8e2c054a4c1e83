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
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "waterbird/errors.hpp"
#include "waterbird/geometry.hpp"
#include "waterbird/random.hpp"
#include "waterbird/taxonomy.hpp"

namespace waterbird {

/// Class-labeled box. image_id names the frame the box lives in: a source
/// image for raw annotations, a tile id for annotations clipped into a tile.
struct Annotation {
  std::string image_id;
  std::string class_name;
  BoundingBox box;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct SurveyImage {
  std::string image_id;
  std::string path;
  int width = 0;
  int height = 0;
  std::optional<AffineTransform> georeference;  // image -> world

  BoundingBox bounds() const {
    if (width <= 0 || height <= 0) throw InputError("image " + image_id + " has no extent");
    return BoundingBox(0, 0, width, height);
  }
};

struct RejectedRow {
  std::size_t line;
  std::string image_id;
  std::string class_name;
  std::string reason;
};

struct AnnotationSet {
  std::map<std::string, std::vector<Annotation>> by_image;
  std::vector<RejectedRow> rejects;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [id, v] : by_image) n += v.size();
    return n;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

/// Splits one CSV record. Double-quoted fields may contain commas; a doubled
/// quote inside a quoted field is a literal quote.
inline std::vector<std::string> split_csv(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && trim(cur).empty()) {
      cur.clear();
      quoted = was_quoted = true;
    } else if (c == ',') {
      fields.emplace_back(was_quoted ? cur : std::string(trim(cur)));
      cur.clear();
      was_quoted = false;
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError(line_no, "unterminated quoted field");
  fields.emplace_back(was_quoted ? cur : std::string(trim(cur)));
  return fields;
}

inline double parse_double(const std::string& field, std::size_t line_no, const char* what) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || field.empty() || !std::isfinite(v)) {
    throw ParseError(line_no, std::string("bad ") + what + " value '" + field + "'");
  }
  return v;
}

}  // namespace detail

/// Reads the annotation CSV (`image_id,class_name,x_min,y_min,x_max,y_max`,
/// header required). Raw class names are folded through the taxonomy; rows
/// with unknown names are collected in `rejects`. When `images` is non-empty,
/// every box must lie inside its image, and rows for unlisted images are
/// rejected.
inline AnnotationSet load_annotations(std::istream& in, const ClassTaxonomy& taxonomy,
                                      const std::map<std::string, SurveyImage>& images = {}) {
  static const std::vector<std::string> kHeader = {"image_id", "class_name", "x_min",
                                                   "y_min",    "x_max",      "y_max"};
  AnnotationSet out;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (line_no == 1 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
    if (detail::trim(view).empty()) continue;
    auto fields = detail::split_csv(view, line_no);
    if (!header_seen) {
      if (fields != kHeader) {
        throw ParseError(line_no, "expected header image_id,class_name,x_min,y_min,x_max,y_max");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 6) {
      throw ParseError(line_no, "expected 6 fields, got " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ParseError(line_no, "empty image_id");
    const double x0 = detail::parse_double(fields[2], line_no, "x_min");
    const double y0 = detail::parse_double(fields[3], line_no, "y_min");
    const double x1 = detail::parse_double(fields[4], line_no, "x_max");
    const double y1 = detail::parse_double(fields[5], line_no, "y_max");
    if (!(x0 < x1) || !(y0 < y1)) {
      throw ParseError(line_no, "degenerate box (min must be less than max)");
    }
    BoundingBox box(x0, y0, x1, y1);

    auto folded = taxonomy.fold(fields[1]);
    if (!folded) {
      out.rejects.push_back({line_no, fields[0], fields[1], "unknown class"});
      continue;
    }
    if (!images.empty()) {
      auto it = images.find(fields[0]);
      if (it == images.end()) {
        out.rejects.push_back({line_no, fields[0], fields[1], "unknown image"});
        continue;
      }
      if (!it->second.bounds().contains(box)) {
        std::ostringstream msg;
        msg << "line " << line_no << ": box " << box << " exceeds image " << fields[0] << " ("
            << it->second.width << "x" << it->second.height << ")";
        throw OutOfBounds(msg.str());
      }
    }
    out.by_image[fields[0]].push_back({fields[0], *folded, box});
  }
  return out;
}

/// Per-class counts over anything with a `class_name` member.
using ClassHistogram = std::map<std::string, std::size_t>;

template <typename Range>
ClassHistogram class_histogram(const Range& items) {
  ClassHistogram h;
  for (const auto& item : items) ++h[item.class_name];
  return h;
}

/// Same, with every trained class present (zero when absent).
template <typename Range>
ClassHistogram class_histogram(const Range& items, const ClassTaxonomy& taxonomy) {
  ClassHistogram h;
  for (const auto& c : taxonomy.trained_classes()) h[c] = 0;
  for (const auto& item : items) ++h[item.class_name];
  return h;
}

struct SplitRatios {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

/// Bucket sizes for n items: validation and test get their rounded share,
/// training takes the remainder. Each bucket is within one item of its quota.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& r) {
  if (!(r.train > 0) || !(r.validation > 0) || !(r.test > 0)) {
    throw BadRatios("split ratios must be positive");
  }
  if (std::abs(r.train + r.validation + r.test - 1.0) > 1e-9) {
    throw BadRatios("split ratios must sum to 1");
  }
  auto share = [n](double ratio) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratio));
  };
  std::size_t val = std::min(share(r.validation), n);
  std::size_t test = std::min(share(r.test), n - val);
  return {n - val - test, val, test};
}

/// Random train/validation/test partition. The assignment depends only on the
/// set of ids and the seed, not on input order.
inline DatasetSplit split_dataset(const std::vector<std::string>& ids,
                                  const SplitRatios& ratios = {}, std::uint64_t seed = 0) {
  std::set<std::string> unique(ids.begin(), ids.end());
  const auto sizes = split_sizes(unique.size(), ratios);

  const std::uint64_t salt = derive_seed(seed, "split");
  std::vector<std::pair<std::uint64_t, std::string>> keyed;
  keyed.reserve(unique.size());
  for (const auto& id : unique) keyed.emplace_back(mix64(fnv1a(id, salt)), id);
  std::sort(keyed.begin(), keyed.end());

  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    auto& bucket = i < sizes[0]             ? split.train
                   : i < sizes[0] + sizes[1] ? split.validation
                                             : split.test;
    bucket.push_back(keyed[i].second);
  }
  for (auto* v : {&split.train, &split.validation, &split.test}) std::sort(v->begin(), v->end());
  return split;
}

/// Splits groups (source images) instead of items, then expands each group to
/// its members. `group_of` maps item id -> group id.
inline DatasetSplit split_by_group(const std::map<std::string, std::string>& group_of,
                                   const SplitRatios& ratios = {}, std::uint64_t seed = 0) {
  std::vector<std::string> groups;
  for (const auto& [item, group] : group_of) groups.push_back(group);
  const DatasetSplit by_group = split_dataset(groups, ratios, seed);
  std::map<std::string, int> bucket_of;
  for (const auto& g : by_group.train) bucket_of[g] = 0;
  for (const auto& g : by_group.validation) bucket_of[g] = 1;
  for (const auto& g : by_group.test) bucket_of[g] = 2;
  DatasetSplit split;
  split.seed = seed;
  for (const auto& [item, group] : group_of) {
    switch (bucket_of.at(group)) {
      case 0: split.train.push_back(item); break;
      case 1: split.validation.push_back(item); break;
      default: split.test.push_back(item); break;
    }
  }
  return split;
}

}  // namespace waterbird
