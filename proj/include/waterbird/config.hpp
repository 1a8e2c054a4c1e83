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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "waterbird/augment.hpp"
#include "waterbird/dataset.hpp"
#include "waterbird/errors.hpp"
#include "waterbird/evaluate.hpp"
#include "waterbird/merge.hpp"
#include "waterbird/oracle.hpp"
#include "waterbird/tiler.hpp"

namespace waterbird {

/// Everything a pipeline run needs. Loaded from a JSON file; command-line
/// flags override file values, which override these defaults.
struct PipelineConfig {
  std::string images;       // directory of survey rasters, or a single raster
  std::string annotations;  // annotation CSV
  std::string taxonomy;     // taxonomy JSON; empty = built-in waterbird taxonomy
  std::string out = "out";

  TilePlan tiling;
  SplitRatios split;
  bool split_by_image = false;
  OversamplePolicy augment;
  NmsOptions nms;
  double mission_iou_threshold = 0.5;
  double score_floor = 0.5;
  EvalOptions eval;
  OracleConfig oracle;
  std::uint64_t seed = 0;

  /// Pushes the top-level seed into every seeded component.
  void propagate_seed() {
    augment.seed = seed;
    oracle.seed = seed;
  }

  void validate() const {
    tiling.validate();
    augment.validate();
    oracle.validate();
    split_sizes(0, split);
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(nms.iou_threshold) || !unit(mission_iou_threshold)) {
      throw InputError("NMS IoU thresholds must be in [0, 1]");
    }
    if (eval.iou_thresholds.empty()) throw InputError("at least one evaluation IoU threshold");
    for (double t : eval.iou_thresholds) {
      if (!(t >= 0.0 && t < 1.0)) throw InputError("evaluation IoU thresholds must be in [0, 1)");
    }
    if (!(eval.confusion_iou_threshold >= 0.0 && eval.confusion_iou_threshold < 1.0)) {
      throw InputError("confusion IoU threshold must be in [0, 1)");
    }
  }

  ClassTaxonomy load_taxonomy() const {
    return taxonomy.empty() ? ClassTaxonomy::waterbirds() : ClassTaxonomy::load(taxonomy);
  }
};

namespace detail {

/// Rejects keys the schema does not know, so typos fail loudly.
inline void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!obj.is_object()) throw ParseError(0, "config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ParseError(0, "config: unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read_if(const nlohmann::json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

}  // namespace detail

/// Applies a JSON config on top of `cfg`. Relative paths are resolved
/// against `base_dir`.
inline void apply_config_json(PipelineConfig& cfg, const nlohmann::json& j,
                              const std::filesystem::path& base_dir = {}) {
  using detail::check_keys;
  using detail::read_if;
  try {
    check_keys(j, {"seed", "paths", "tiling", "split", "augment", "merge", "evaluate", "oracle"},
               "");
    read_if(j, "seed", cfg.seed);
    auto resolve = [&](const nlohmann::json& obj, const char* key, std::string& target) {
      if (!obj.contains(key)) return;
      std::filesystem::path p = obj.at(key).get<std::string>();
      target = (p.is_absolute() || base_dir.empty() ? p : base_dir / p).lexically_normal().string();
    };
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      check_keys(p, {"images", "annotations", "taxonomy", "out"}, "paths");
      resolve(p, "images", cfg.images);
      resolve(p, "annotations", cfg.annotations);
      resolve(p, "taxonomy", cfg.taxonomy);
      resolve(p, "out", cfg.out);
    }
    if (j.contains("tiling")) {
      const auto& t = j["tiling"];
      check_keys(t, {"tile_width", "tile_height", "stride_x", "stride_y", "retention_threshold"},
                 "tiling");
      read_if(t, "tile_width", cfg.tiling.tile_width);
      read_if(t, "tile_height", cfg.tiling.tile_height);
      read_if(t, "stride_x", cfg.tiling.stride_x);
      read_if(t, "stride_y", cfg.tiling.stride_y);
      read_if(t, "retention_threshold", cfg.tiling.retention_threshold);
    }
    if (j.contains("split")) {
      const auto& s = j["split"];
      check_keys(s, {"train", "validation", "test", "by_image"}, "split");
      read_if(s, "train", cfg.split.train);
      read_if(s, "validation", cfg.split.validation);
      read_if(s, "test", cfg.split.test);
      read_if(s, "by_image", cfg.split_by_image);
    }
    if (j.contains("augment")) {
      const auto& a = j["augment"];
      check_keys(a, {"dominance_threshold", "ops", "max_brightness_delta", "min_contrast",
                     "max_contrast"},
                 "augment");
      read_if(a, "dominance_threshold", cfg.augment.dominance_threshold);
      if (a.contains("ops")) {
        cfg.augment.ops.clear();
        for (const auto& name : a["ops"]) {
          cfg.augment.ops.push_back({augmentation_from_string(name.get<std::string>())});
        }
      }
      for (auto& op : cfg.augment.ops) {
        read_if(a, "max_brightness_delta", op.max_brightness_delta);
        read_if(a, "min_contrast", op.min_contrast);
        read_if(a, "max_contrast", op.max_contrast);
      }
    }
    if (j.contains("merge")) {
      const auto& m = j["merge"];
      check_keys(m, {"iou_threshold", "class_aware", "mission_iou_threshold", "score_floor"},
                 "merge");
      read_if(m, "iou_threshold", cfg.nms.iou_threshold);
      read_if(m, "class_aware", cfg.nms.class_aware);
      read_if(m, "mission_iou_threshold", cfg.mission_iou_threshold);
      read_if(m, "score_floor", cfg.score_floor);
    }
    if (j.contains("evaluate")) {
      const auto& e = j["evaluate"];
      check_keys(e, {"iou_thresholds", "confusion_score_floor", "confusion_iou_threshold"},
                 "evaluate");
      read_if(e, "iou_thresholds", cfg.eval.iou_thresholds);
      read_if(e, "confusion_score_floor", cfg.eval.confusion_score_floor);
      read_if(e, "confusion_iou_threshold", cfg.eval.confusion_iou_threshold);
    }
    if (j.contains("oracle")) {
      const auto& o = j["oracle"];
      check_keys(o, {"jitter", "drop_rate", "spurious_rate", "misclass_rate"}, "oracle");
      read_if(o, "jitter", cfg.oracle.jitter);
      read_if(o, "drop_rate", cfg.oracle.drop_rate);
      read_if(o, "spurious_rate", cfg.oracle.spurious_rate);
      read_if(o, "misclass_rate", cfg.oracle.misclass_rate);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("config: ") + e.what());
  }
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, path + ": " + e.what());
  }
  PipelineConfig cfg;
  apply_config_json(cfg, j, std::filesystem::path(path).parent_path());
  return cfg;
}

}  // namespace waterbird
