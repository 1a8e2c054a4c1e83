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
// waterbird: command-line front end for the survey pipeline.
//
//   waterbird tile          --config run.json
//   waterbird split         --config run.json
//   waterbird augment       --config run.json
//   waterbird detect-oracle --config run.json --drop-rate 0.1
//   waterbird merge-count   --config run.json [--mission]
//   waterbird evaluate      --config run.json [--image-level]
//   waterbird render        --config run.json [--image ID]
//   waterbird detect-model  --config run.json --command "python bridge.py"
//
// Exit codes: 0 success, 1 input error, 2 internal invariant violation.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "waterbird/config.hpp"
#include "waterbird/errors.hpp"
#include "waterbird/pipeline.hpp"

namespace {

using namespace waterbird;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> images;
  std::optional<std::string> annotations;
  std::optional<std::string> taxonomy;
  std::optional<std::string> manifest;
  std::optional<std::string> detections;

  std::optional<int> tile_size;
  std::optional<int> stride;
  std::optional<double> retention;
  bool split_by_image = false;
  std::optional<double> dominance;
  std::optional<double> nms_iou;
  std::optional<double> mission_iou;
  std::optional<double> score_floor;
  bool class_agnostic = false;
  bool mission = false;
  std::vector<double> eval_iou;
  std::optional<double> confusion_floor;
  bool image_level = false;
  std::optional<double> jitter;
  std::optional<double> drop_rate;
  std::optional<double> spurious_rate;
  std::optional<double> misclass_rate;
  std::string image;
  int thickness = 2;
  std::string command;
};

template <typename T>
void override_with(T& target, const std::optional<T>& flag) {
  if (flag) target = *flag;
}

PipelineConfig resolve_config(const Flags& f) {
  PipelineConfig cfg = f.config.empty() ? PipelineConfig{} : load_config(f.config);
  override_with(cfg.seed, f.seed);
  override_with(cfg.out, f.out);
  override_with(cfg.images, f.images);
  override_with(cfg.annotations, f.annotations);
  override_with(cfg.taxonomy, f.taxonomy);
  if (f.tile_size) cfg.tiling.tile_width = cfg.tiling.tile_height = *f.tile_size;
  if (f.stride) cfg.tiling.stride_x = cfg.tiling.stride_y = *f.stride;
  override_with(cfg.tiling.retention_threshold, f.retention);
  if (f.split_by_image) cfg.split_by_image = true;
  override_with(cfg.augment.dominance_threshold, f.dominance);
  override_with(cfg.nms.iou_threshold, f.nms_iou);
  override_with(cfg.mission_iou_threshold, f.mission_iou);
  override_with(cfg.score_floor, f.score_floor);
  if (f.class_agnostic) cfg.nms.class_aware = false;
  if (!f.eval_iou.empty()) cfg.eval.iou_thresholds = f.eval_iou;
  override_with(cfg.eval.confusion_score_floor, f.confusion_floor);
  override_with(cfg.oracle.jitter, f.jitter);
  override_with(cfg.oracle.drop_rate, f.drop_rate);
  override_with(cfg.oracle.spurious_rate, f.spurious_rate);
  override_with(cfg.oracle.misclass_rate, f.misclass_rate);
  cfg.propagate_seed();
  cfg.validate();
  return cfg;
}

std::string manifest_or(const Flags& f, const PipelineConfig& cfg, const char* name) {
  return f.manifest ? *f.manifest : out_path(cfg, name).string();
}

std::string detections_or(const Flags& f, const PipelineConfig& cfg, const char* name) {
  return f.detections ? *f.detections : out_path(cfg, name).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiling, merging, counting and evaluation for aerial bird surveys"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;

  app.add_option("--config", f.config, "JSON pipeline config")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "Top-level random seed");
  app.add_option("--out", f.out, "Output directory");

  auto* tile = app.add_subcommand("tile", "Cut survey images into overlapping tiles");
  tile->add_option("--images", f.images, "Directory of survey rasters, or one raster");
  tile->add_option("--annotations", f.annotations, "Annotation CSV");
  tile->add_option("--taxonomy", f.taxonomy, "Taxonomy JSON (default: built-in)");
  tile->add_option("--tile-size", f.tile_size, "Square tile side in pixels");
  tile->add_option("--stride", f.stride, "Window shift in pixels");
  tile->add_option("--retention", f.retention, "Minimum retained area fraction (exclusive)");

  auto* split = app.add_subcommand("split", "Random train/validation/test split of tiles");
  split->add_option("--manifest", f.manifest, "Tiles manifest (default: <out>/manifest.json)");
  split->add_flag("--split-by-image", f.split_by_image, "Keep all tiles of an image together");

  auto* augment = app.add_subcommand("augment", "Oversample minority-dominated training tiles");
  augment->add_option("--manifest", f.manifest,
                      "Training manifest (default: <out>/manifest_train.json)");
  augment->add_option("--taxonomy", f.taxonomy, "Taxonomy JSON (default: built-in)");
  augment->add_option("--dominance", f.dominance, "Minority share a tile must exceed");

  auto* oracle = app.add_subcommand("detect-oracle", "Emit perturbed ground truth as detections");
  oracle->add_option("--manifest", f.manifest, "Tiles manifest (default: <out>/manifest.json)");
  oracle->add_option("--detections", f.detections, "Output (default: <out>/detections.jsonl)");
  oracle->add_option("--taxonomy", f.taxonomy, "Taxonomy JSON (default: built-in)");
  oracle->add_option("--jitter", f.jitter, "Max box displacement in pixels");
  oracle->add_option("--drop-rate", f.drop_rate, "Probability of missing a bird");
  oracle->add_option("--spurious-rate", f.spurious_rate, "Probability of a false box per tile");
  oracle->add_option("--misclass-rate", f.misclass_rate, "Probability of a wrong label");

  auto* merge = app.add_subcommand("merge-count", "Back-project, de-duplicate and count");
  merge->add_option("--detections", f.detections, "Tile detections (default: <out>/detections.jsonl)");
  merge->add_option("--manifest", f.manifest, "Tiles manifest (default: <out>/manifest.json)");
  merge->add_option("--taxonomy", f.taxonomy, "Taxonomy JSON (default: built-in)");
  merge->add_option("--iou", f.nms_iou, "NMS IoU threshold");
  merge->add_option("--mission-iou", f.mission_iou, "World-frame NMS IoU threshold");
  merge->add_option("--score-floor", f.score_floor, "Minimum score counted");
  merge->add_flag("--class-agnostic", f.class_agnostic, "Suppress across classes");
  merge->add_flag("--mission", f.mission, "Also merge all images in world coordinates");

  auto* evaluate = app.add_subcommand("evaluate", "Interpolated AP and confusion matrix");
  evaluate->add_option("--detections", f.detections,
                       "Tile detections (default: <out>/detections.jsonl)");
  evaluate->add_option("--manifest", f.manifest, "Tiles manifest (default: <out>/manifest.json)");
  evaluate->add_option("--annotations", f.annotations, "Annotation CSV (image level only)");
  evaluate->add_option("--taxonomy", f.taxonomy, "Taxonomy JSON (default: built-in)");
  evaluate->add_option("--iou", f.eval_iou, "IoU thresholds (repeatable)");
  evaluate->add_option("--confusion-floor", f.confusion_floor, "Score a detection must exceed");
  evaluate->add_flag("--image-level", f.image_level, "Merge to images before evaluating");
  evaluate->add_option("--nms-iou", f.nms_iou, "NMS IoU threshold (image level)");
  evaluate->add_flag("--class-agnostic", f.class_agnostic, "Class-agnostic NMS (image level)");

  auto* render = app.add_subcommand("render", "Draw merged detections over survey images");
  render->add_option("--detections", f.detections,
                     "Merged detections (default: <out>/merged_detections.jsonl)");
  render->add_option("--manifest", f.manifest, "Tiles manifest (default: <out>/manifest.json)");
  render->add_option("--taxonomy", f.taxonomy, "Taxonomy JSON (default: built-in)");
  render->add_option("--image", f.image, "Render only this image id");
  render->add_option("--thickness", f.thickness, "Outline thickness in pixels")
      ->check(CLI::PositiveNumber);

  auto* model = app.add_subcommand("detect-model", "Run an external detector over the tiles");
  model->add_option("--command", f.command, "Detector command; called as CMD MANIFEST OUTPUT")
      ->required();
  model->add_option("--manifest", f.manifest, "Tiles manifest (default: <out>/manifest.json)");
  model->add_option("--detections", f.detections, "Output (default: <out>/detections.jsonl)");
  model->add_option("--taxonomy", f.taxonomy, "Taxonomy JSON (default: built-in)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const PipelineConfig cfg = resolve_config(f);
    if (*tile) {
      const auto s = cmd_tile(cfg);
      std::cout << "tiled " << s.images << " image(s) into " << s.tiles << " tiles ("
                << s.annotations << " annotations, " << s.rejects << " rejected rows)\n";
    } else if (*split) {
      const auto s = cmd_split(cfg, manifest_or(f, cfg, "manifest.json"));
      std::cout << "split: " << s.train.size() << " train, " << s.validation.size()
                << " validation, " << s.test.size() << " test\n";
    } else if (*augment) {
      const auto m = cmd_augment(cfg, manifest_or(f, cfg, "manifest_train.json"));
      std::cout << "augmented training manifest has " << m.tiles.size() << " tiles\n";
    } else if (*oracle) {
      const auto d = cmd_detect_oracle(cfg, manifest_or(f, cfg, "manifest.json"),
                                       detections_or(f, cfg, "detections.jsonl"));
      std::cout << "wrote " << d.size() << " detections\n";
    } else if (*merge) {
      const auto s = cmd_merge_count(cfg, detections_or(f, cfg, "detections.jsonl"),
                                     manifest_or(f, cfg, "manifest.json"), f.mission);
      for (const auto& r : s.images) std::cout << r.scope << ": " << r.total << " birds\n";
      if (s.mission) std::cout << "mission: " << s.mission->total << " birds\n";
      if (s.rejects) std::cout << s.rejects << " detection line(s) rejected\n";
    } else if (*evaluate) {
      const auto r = cmd_evaluate(cfg, detections_or(f, cfg, "detections.jsonl"),
                                  manifest_or(f, cfg, "manifest.json"), f.image_level);
      for (std::size_t t = 0; t < r.iou_thresholds.size(); ++t) {
        std::cout << "mAP@" << r.iou_thresholds[t] << " = " << r.mean_ap[t] << "\n";
      }
    } else if (*render) {
      RenderStyle style;
      style.thickness = f.thickness;
      const auto n = cmd_render(cfg, detections_or(f, cfg, "merged_detections.jsonl"),
                                manifest_or(f, cfg, "manifest.json"), f.image, style);
      std::cout << "rendered " << n << " overlay(s)\n";
    } else if (*model) {
      const auto n = cmd_detect_model(cfg, f.command, manifest_or(f, cfg, "manifest.json"),
                                      detections_or(f, cfg, "detections.jsonl"));
      std::cout << "detector wrote " << n << " valid detections\n";
    }
  } catch (const InvariantViolation& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
