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

// The pipeline commands behind the `waterbird` CLI. Each reads and writes
// files under PipelineConfig::out; tests drive them directly.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "waterbird/augment.hpp"
#include "waterbird/config.hpp"
#include "waterbird/dataset.hpp"
#include "waterbird/detection.hpp"
#include "waterbird/errors.hpp"
#include "waterbird/evaluate.hpp"
#include "waterbird/merge.hpp"
#include "waterbird/oracle.hpp"
#include "waterbird/raster_io.hpp"
#include "waterbird/render.hpp"
#include "waterbird/tiler.hpp"

namespace waterbird {

namespace fs = std::filesystem;

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed: " + path.string());
}

inline void require_exists(const std::string& path, const std::string& what) {
  if (path.empty()) throw InputError(what + " path is not set");
  if (!fs::exists(path)) throw InputError(what + " not found: " + path);
}

inline bool is_raster(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".tif" || ext == ".tiff";
}

/// World-file sidecar next to a raster: foo.pgw / foo.jgw / foo.tfw / foo.wld.
inline std::optional<fs::path> world_file_for(const fs::path& raster) {
  for (const char* ext : {".pgw", ".jgw", ".tfw", ".wld", ".pngw", ".jpgw", ".tifw"}) {
    fs::path candidate = raster;
    candidate.replace_extension(ext);
    if (fs::exists(candidate)) return candidate;
  }
  return std::nullopt;
}

inline std::vector<fs::path> discover_images(const std::string& images) {
  require_exists(images, "images");
  std::vector<fs::path> out;
  if (fs::is_directory(images)) {
    for (const auto& entry : fs::directory_iterator(images)) {
      if (entry.is_regular_file() && is_raster(entry.path())) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
  } else {
    out.emplace_back(images);
  }
  if (out.empty()) throw InputError("no rasters found in " + images);
  return out;
}

inline fs::path resolve_against(const fs::path& manifest_path, const std::string& relative) {
  fs::path p(relative);
  return p.is_absolute() ? p : manifest_path.parent_path() / p;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

inline std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-') ? c : '_';
  return out;
}

}  // namespace detail

inline fs::path out_path(const PipelineConfig& cfg, const std::string& name) {
  return fs::path(cfg.out) / name;
}

// ---------------------------------------------------------------------------
// tile

struct TileSummary {
  std::size_t images = 0;
  std::size_t tiles = 0;
  std::size_t annotations = 0;
  std::size_t rejects = 0;
};

/// Tiles every survey raster, writing tiles/<tile_id>.png, manifest.json and
/// annotation_rejects.csv under the output directory.
inline TileSummary cmd_tile(const PipelineConfig& cfg) {
  cfg.validate();
  const auto taxonomy = cfg.load_taxonomy();
  const auto rasters = detail::discover_images(cfg.images);

  AnnotationSet annotations;
  if (!cfg.annotations.empty()) {
    detail::require_exists(cfg.annotations, "annotations");
    std::ifstream in(cfg.annotations);
    annotations = load_annotations(in, taxonomy);
  }

  std::set<std::string> ids;
  for (const auto& r : rasters) {
    if (!ids.insert(r.stem().string()).second) {
      throw InputError("two rasters share the image id " + r.stem().string());
    }
  }
  for (auto it = annotations.by_image.begin(); it != annotations.by_image.end();) {
    if (ids.count(it->first)) {
      ++it;
      continue;
    }
    for (const auto& a : it->second) {
      annotations.rejects.push_back({0, a.image_id, a.class_name, "unknown image"});
    }
    it = annotations.by_image.erase(it);
  }

  fs::create_directories(out_path(cfg, "tiles"));
  TileManifest manifest;
  manifest.plan = cfg.tiling;
  TileSummary summary;
  for (const auto& raster : rasters) {
    const Image pixels = read_image(raster.string());
    SurveyImage image;
    image.image_id = raster.stem().string();
    image.path = fs::absolute(raster).lexically_normal().string();
    image.width = pixels.width();
    image.height = pixels.height();
    if (auto wf = detail::world_file_for(raster)) image.georeference = load_world_file(wf->string());

    const auto& anns = annotations.by_image[image.image_id];
    const BoundingBox bounds = image.bounds();
    for (const auto& a : anns) {
      if (!bounds.contains(a.box)) {
        std::ostringstream msg;
        msg << "annotation " << a.box << " (" << a.class_name << ") exceeds image "
            << image.image_id << " (" << image.width << "x" << image.height << ")";
        throw OutOfBounds(msg.str());
      }
    }
    summary.annotations += anns.size();
    for_each_tile(pixels, image, anns, cfg.tiling, [&](const TileRecord& rec, const Image& tile) {
      write_png(tile, (fs::path(cfg.out) / rec.path).string());
      manifest.tiles.push_back(rec);
    });
    manifest.images.push_back(std::move(image));
  }
  save_manifest(manifest, out_path(cfg, "manifest.json").string());

  std::ostringstream rejects;
  rejects << "line,image_id,class_name,reason\n";
  for (const auto& r : annotations.rejects) {
    rejects << r.line << ',' << detail::csv_field(r.image_id) << ','
            << detail::csv_field(r.class_name) << ',' << r.reason << '\n';
  }
  detail::write_text(out_path(cfg, "annotation_rejects.csv"), rejects.str());

  summary.images = manifest.images.size();
  summary.tiles = manifest.tiles.size();
  summary.rejects = annotations.rejects.size();
  return summary;
}

// ---------------------------------------------------------------------------
// split

inline TileManifest subset_manifest(const TileManifest& m, const std::vector<std::string>& ids) {
  const std::set<std::string> keep(ids.begin(), ids.end());
  TileManifest out;
  out.plan = m.plan;
  out.images = m.images;
  for (const auto& t : m.tiles) {
    if (keep.count(t.tile_id)) out.tiles.push_back(t);
  }
  return out;
}

/// Writes split.json and manifest_{train,validation,test}.json, with tile
/// paths rebased onto the output directory.
inline DatasetSplit cmd_split(const PipelineConfig& cfg, const std::string& manifest_path) {
  cfg.validate();
  detail::require_exists(manifest_path, "manifest");
  TileManifest m = load_manifest(manifest_path);
  DatasetSplit split;
  if (cfg.split_by_image) {
    std::map<std::string, std::string> group_of;
    for (const auto& t : m.tiles) group_of[t.tile_id] = t.image_id;
    split = split_by_group(group_of, cfg.split, cfg.seed);
  } else {
    std::vector<std::string> ids;
    for (const auto& t : m.tiles) ids.push_back(t.tile_id);
    split = split_dataset(ids, cfg.split, cfg.seed);
  }
  const fs::path out_dir = fs::absolute(cfg.out).lexically_normal();
  for (auto& t : m.tiles) {
    const fs::path abs = fs::absolute(detail::resolve_against(manifest_path, t.path)).lexically_normal();
    t.path = abs.lexically_relative(out_dir).generic_string();
  }
  save_manifest(subset_manifest(m, split.train), out_path(cfg, "manifest_train.json").string());
  save_manifest(subset_manifest(m, split.validation),
                out_path(cfg, "manifest_validation.json").string());
  save_manifest(subset_manifest(m, split.test), out_path(cfg, "manifest_test.json").string());
  const nlohmann::json j = {{"seed", split.seed},
                            {"by_image", cfg.split_by_image},
                            {"ratios", {cfg.split.train, cfg.split.validation, cfg.split.test}},
                            {"train", split.train},
                            {"validation", split.validation},
                            {"test", split.test}};
  detail::write_text(out_path(cfg, "split.json"), j.dump(2) + "\n");
  return split;
}

// ---------------------------------------------------------------------------
// augment

/// Oversamples minority-dominated tiles of a training manifest. Writes
/// tiles_aug/<tile_id>~<op>.png and manifest_train_augmented.json.
inline TileManifest cmd_augment(const PipelineConfig& cfg, const std::string& manifest_path) {
  cfg.validate();
  detail::require_exists(manifest_path, "manifest");
  const auto taxonomy = cfg.load_taxonomy();
  const TileManifest train = load_manifest(manifest_path);
  PipelineConfig seeded = cfg;
  seeded.propagate_seed();
  TileManifest augmented = build_augmented_set(train, taxonomy, seeded.augment);

  const fs::path out_dir = fs::absolute(cfg.out).lexically_normal();
  fs::create_directories(out_dir / "tiles_aug");
  std::map<std::string, Image> cache;
  for (auto& t : augmented.tiles) {
    if (!t.provenance) {
      const fs::path abs = fs::absolute(detail::resolve_against(manifest_path, t.path)).lexically_normal();
      t.path = abs.lexically_relative(out_dir).generic_string();
      continue;
    }
    const TileRecord* source = train.find(t.provenance->source_tile);
    if (!source) throw InvariantViolation("augmented tile without a source: " + t.tile_id);
    auto it = cache.find(source->tile_id);
    if (it == cache.end()) {
      cache.clear();
      it = cache.emplace(source->tile_id,
                         read_image(detail::resolve_against(manifest_path, source->path).string()))
               .first;
    }
    write_png(render_augmented_tile(t, it->second), (out_dir / t.path).string());
  }
  save_manifest(augmented, (out_dir / "manifest_train_augmented.json").string());
  return augmented;
}

// ---------------------------------------------------------------------------
// detect-oracle

inline std::vector<Detection> cmd_detect_oracle(const PipelineConfig& cfg,
                                                const std::string& manifest_path,
                                                const std::string& detections_path) {
  cfg.validate();
  detail::require_exists(manifest_path, "manifest");
  const auto taxonomy = cfg.load_taxonomy();
  const TileManifest m = load_manifest(manifest_path);
  PipelineConfig seeded = cfg;
  seeded.propagate_seed();
  auto dets = oracle_detect(m.tiles, taxonomy.trained_classes(), seeded.oracle);
  std::ostringstream out;
  write_detections(out, dets);
  detail::write_text(detections_path, out.str());
  return dets;
}

// ---------------------------------------------------------------------------
// merge-count

inline std::string rejects_csv(const std::vector<RejectedDetection>& rejects) {
  std::ostringstream out;
  out << "line,class_name,reason\n";
  for (const auto& r : rejects) {
    out << r.line << ',' << detail::csv_field(r.class_name) << ',' << r.reason << '\n';
  }
  return out.str();
}

inline DetectionFile read_detections_file(const std::string& path, const ClassTaxonomy& taxonomy) {
  detail::require_exists(path, "detections");
  std::ifstream in(path);
  try {
    return read_detections(in, &taxonomy);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.what());
  }
}

struct MergeSummary {
  std::vector<CountReport> images;
  std::optional<CountReport> mission;
  std::size_t rejects = 0;
};

/// Back-projects tile detections, de-duplicates each image with NMS and
/// counts. With `mission`, also merges all images in the world frame.
/// Writes merged_detections.jsonl, counts.csv, counts.json and
/// detection_rejects.csv.
inline MergeSummary cmd_merge_count(const PipelineConfig& cfg, const std::string& detections_path,
                                    const std::string& manifest_path, bool mission) {
  cfg.validate();
  detail::require_exists(manifest_path, "manifest");
  const auto taxonomy = cfg.load_taxonomy();
  const TileManifest m = load_manifest(manifest_path);
  const DetectionFile file = read_detections_file(detections_path, taxonomy);
  if (!file.detections.empty() && file.detections.front().frame != Frame::tile) {
    throw InputError(detections_path + ": expected tile-frame detections");
  }
  auto per_image = group_by_image(back_project(file.detections, m));

  MergeSummary summary;
  summary.rejects = file.rejects.size();
  std::vector<Detection> merged;
  std::map<std::string, std::vector<Detection>> kept_by_image;
  for (const auto& image : m.images) {
    auto kept = nms(per_image[image.image_id], cfg.nms);
    summary.images.push_back(count(kept, taxonomy.trained_classes(), cfg.score_floor,
                                   image.image_id, cfg.nms.iou_threshold));
    merged.insert(merged.end(), kept.begin(), kept.end());
    kept_by_image[image.image_id] = std::move(kept);
  }
  std::vector<CountReport> all = summary.images;
  if (mission) {
    std::map<std::string, AffineTransform> geo;
    for (const auto& image : m.images) {
      if (!image.georeference) throw MissingGeoreference(image.image_id);
      geo.emplace(image.image_id, *image.georeference);
    }
    NmsOptions mission_nms = cfg.nms;
    mission_nms.iou_threshold = cfg.mission_iou_threshold;
    auto result = merge_mission(kept_by_image, geo, taxonomy.trained_classes(), mission_nms,
                                cfg.score_floor, "mission");
    summary.mission = result.report;
    all.push_back(result.report);
    std::ostringstream world;
    write_detections(world, result.detections);
    detail::write_text(out_path(cfg, "mission_detections.jsonl"), world.str());
  }

  std::ostringstream merged_text, csv;
  write_detections(merged_text, merged);
  write_counts_csv(csv, all);
  nlohmann::json j = {{"images", nlohmann::json::array()}, {"rejected_lines", summary.rejects}};
  for (const auto& r : summary.images) j["images"].push_back(to_json(r));
  if (summary.mission) j["mission"] = to_json(*summary.mission);
  detail::write_text(out_path(cfg, "merged_detections.jsonl"), merged_text.str());
  detail::write_text(out_path(cfg, "counts.csv"), csv.str());
  detail::write_text(out_path(cfg, "counts.json"), j.dump(2) + "\n");
  detail::write_text(out_path(cfg, "detection_rejects.csv"), rejects_csv(file.rejects));
  return summary;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvalInputs {
  std::vector<Detection> detections;
  std::vector<Annotation> ground_truth;
  std::size_t skipped = 0;  // detections on tiles outside the manifest
};

/// Evaluates detections against the manifest's ground truth. Tile level by
/// default; at image level, detections are back-projected and de-duplicated
/// first and compared with the original annotation CSV. Writes eval/report.json,
/// eval/ap.csv, eval/confusion.csv, eval/rejects.csv and eval/pr/*.csv.
inline EvalReport cmd_evaluate(const PipelineConfig& cfg, const std::string& detections_path,
                               const std::string& manifest_path, bool image_level = false) {
  cfg.validate();
  detail::require_exists(manifest_path, "manifest");
  const auto taxonomy = cfg.load_taxonomy();
  const TileManifest m = load_manifest(manifest_path);
  const DetectionFile file = read_detections_file(detections_path, taxonomy);

  EvalInputs in;
  const auto index = m.index();
  for (const auto& d : file.detections) {
    if (d.frame != Frame::tile) throw InputError(detections_path + ": expected tile-frame detections");
    if (index.count(d.provenance)) {
      in.detections.push_back(d);
    } else {
      ++in.skipped;
    }
  }
  if (image_level) {
    detail::require_exists(cfg.annotations, "annotations");
    std::ifstream csv(cfg.annotations);
    const AnnotationSet gt = load_annotations(csv, taxonomy);
    std::vector<Detection> kept;
    for (auto& [image_id, dets] : group_by_image(back_project(in.detections, m))) {
      auto k = nms(std::move(dets), cfg.nms);
      kept.insert(kept.end(), k.begin(), k.end());
    }
    in.detections = std::move(kept);
    for (const auto& image : m.images) {
      auto it = gt.by_image.find(image.image_id);
      if (it != gt.by_image.end()) {
        in.ground_truth.insert(in.ground_truth.end(), it->second.begin(), it->second.end());
      }
    }
  } else {
    in.ground_truth = m.all_annotations();
  }

  const EvalReport report = evaluate(in.detections, in.ground_truth, taxonomy.trained_classes(), cfg.eval);
  const fs::path dir = out_path(cfg, "eval");
  nlohmann::json j = to_json(report);
  j["level"] = image_level ? "image" : "tile";
  j["rejected_lines"] = file.rejects.size();
  j["skipped_detections"] = in.skipped;
  std::ostringstream ap, cm;
  write_ap_csv(ap, report);
  write_confusion_csv(cm, report.confusion);
  detail::write_text(dir / "report.json", j.dump(2) + "\n");
  detail::write_text(dir / "ap.csv", ap.str());
  detail::write_text(dir / "confusion.csv", cm.str());
  detail::write_text(dir / "rejects.csv", rejects_csv(file.rejects));
  for (const auto& cr : report.classes) {
    for (std::size_t t = 0; t < report.iou_thresholds.size(); ++t) {
      std::ostringstream pr;
      write_pr_csv(pr, cr.per_threshold[t].curve);
      detail::write_text(dir / "pr" /
                             (detail::sanitize(cr.class_name) + "@" +
                              format_number(report.iou_thresholds[t]) + ".csv"),
                         pr.str());
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// render

/// Draws merged (image-frame) detections over each source image; writes
/// overlays/<image_id>.png. An empty `only_image` renders every image.
inline std::size_t cmd_render(const PipelineConfig& cfg, const std::string& detections_path,
                              const std::string& manifest_path, const std::string& only_image = {},
                              const RenderStyle& style = {}) {
  cfg.validate();
  detail::require_exists(manifest_path, "manifest");
  const auto taxonomy = cfg.load_taxonomy();
  const TileManifest m = load_manifest(manifest_path);
  const DetectionFile file = read_detections_file(detections_path, taxonomy);
  if (!file.detections.empty() && file.detections.front().frame != Frame::image) {
    throw InputError(detections_path + ": expected image-frame (merged) detections");
  }
  auto by_image = group_by_image(file.detections);
  std::size_t written = 0;
  for (const auto& image : m.images) {
    if (!only_image.empty() && image.image_id != only_image) continue;
    const Image pixels = read_image(image.path);
    const Image overlay = render_overlay(pixels, by_image[image.image_id],
                                         taxonomy.trained_classes(), style);
    fs::create_directories(out_path(cfg, "overlays"));
    write_png(overlay, out_path(cfg, "overlays/" + image.image_id + ".png").string());
    ++written;
  }
  if (!only_image.empty() && written == 0) throw InputError("no such image in manifest: " + only_image);
  return written;
}

// ---------------------------------------------------------------------------
// detect-model

/// Runs an external detector as `<command> <manifest> <output>` and checks
/// that what it wrote is valid wire format whose tile ids all exist in the
/// manifest and whose classes are all trained classes.
inline std::size_t cmd_detect_model(const PipelineConfig& cfg, const std::string& command,
                                    const std::string& manifest_path,
                                    const std::string& detections_path) {
  cfg.validate();
  detail::require_exists(manifest_path, "manifest");
  if (command.empty()) throw InputError("detect-model needs --command");
  const auto taxonomy = cfg.load_taxonomy();
  const TileManifest m = load_manifest(manifest_path);
  if (fs::path(detections_path).has_parent_path()) {
    fs::create_directories(fs::path(detections_path).parent_path());
  }
  auto quote = [](const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
  };
  const std::string full = command + " " + quote(manifest_path) + " " + quote(detections_path);
  if (const int rc = std::system(full.c_str()); rc != 0) {
    throw InputError("detector command failed (status " + std::to_string(rc) + "): " + command);
  }
  const DetectionFile file = read_detections_file(detections_path, taxonomy);
  if (!file.rejects.empty()) {
    throw InputError(detections_path + ": line " + std::to_string(file.rejects.front().line) +
                     ": unmapped class '" + file.rejects.front().class_name + "'");
  }
  const auto index = m.index();
  for (const auto& d : file.detections) {
    if (d.frame != Frame::tile) throw InputError(detections_path + ": expected tile-frame detections");
    if (!index.count(d.provenance)) throw UnknownTile(d.provenance);
  }
  return file.detections.size();
}

}  // namespace waterbird
