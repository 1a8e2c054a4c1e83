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
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "waterbird/dataset.hpp"
#include "waterbird/errors.hpp"
#include "waterbird/geometry.hpp"
#include "waterbird/image.hpp"
#include "waterbird/random.hpp"
#include "waterbird/taxonomy.hpp"
#include "waterbird/tiler.hpp"

namespace waterbird {

enum class AugmentationKind { horizontal_mirror, vertical_mirror, rotate_90, brightness_contrast };

inline constexpr std::array<AugmentationKind, 4> kAllAugmentations = {
    AugmentationKind::horizontal_mirror, AugmentationKind::vertical_mirror,
    AugmentationKind::rotate_90, AugmentationKind::brightness_contrast};

inline std::string_view to_string(AugmentationKind k) {
  switch (k) {
    case AugmentationKind::horizontal_mirror: return "horizontal_mirror";
    case AugmentationKind::vertical_mirror: return "vertical_mirror";
    case AugmentationKind::rotate_90: return "rotate_90";
    case AugmentationKind::brightness_contrast: return "brightness_contrast";
  }
  return "unknown";
}

inline AugmentationKind augmentation_from_string(std::string_view name) {
  for (auto k : kAllAugmentations) {
    if (to_string(k) == name) return k;
  }
  throw InputError("unknown augmentation: " + std::string(name));
}

/// One configured augmentation. The photometric ranges apply only to
/// brightness_contrast; the actual values are drawn per tile.
struct AugmentationOp {
  AugmentationKind kind = AugmentationKind::horizontal_mirror;
  double max_brightness_delta = 0.2;  // delta drawn from [-max, max], in units of full scale
  double min_contrast = 0.8;
  double max_contrast = 1.2;
};

/// An augmentation with its random parameters fixed.
struct AppliedAugmentation {
  AugmentationKind kind = AugmentationKind::horizontal_mirror;
  double brightness_delta = 0.0;
  double contrast = 1.0;
};

struct OversamplePolicy {
  double dominance_threshold = 0.8;
  std::vector<AugmentationOp> ops = {{AugmentationKind::horizontal_mirror},
                                     {AugmentationKind::vertical_mirror},
                                     {AugmentationKind::rotate_90},
                                     {AugmentationKind::brightness_contrast}};
  std::uint64_t seed = 0;

  void validate() const {
    if (!(dominance_threshold > 0.0) || dominance_threshold > 1.0) {
      throw InputError("dominance threshold must be in (0, 1]");
    }
    for (const auto& op : ops) {
      if (op.max_brightness_delta < 0.0 || op.min_contrast < 0.0 ||
          op.min_contrast > op.max_contrast) {
        throw InputError("bad photometric range for " + std::string(to_string(op.kind)));
      }
    }
  }
};

/// Box transform from a width x height tile into the augmented tile. Mirrors
/// and the quarter turn are exact isometries; photometric ops are identity.
inline AffineTransform augmentation_transform(AugmentationKind kind, int width, int height) {
  switch (kind) {
    case AugmentationKind::horizontal_mirror: return AffineTransform(-1, 0, width, 0, 1, 0);
    case AugmentationKind::vertical_mirror: return AffineTransform(1, 0, 0, 0, -1, height);
    case AugmentationKind::rotate_90: return AffineTransform(0, -1, height, 1, 0, 0);
    case AugmentationKind::brightness_contrast: return AffineTransform::identity();
  }
  return AffineTransform::identity();
}

/// True when more than `threshold` of the tile's annotations (by count) are
/// minority classes. Empty tiles never qualify.
inline bool minority_dominated(std::span<const Annotation> annotations,
                               const ClassTaxonomy& taxonomy, double threshold) {
  if (annotations.empty()) return false;
  const auto minority = std::count_if(annotations.begin(), annotations.end(), [&](const auto& a) {
    return taxonomy.is_minority(a.class_name);
  });
  return static_cast<double>(minority) / static_cast<double>(annotations.size()) > threshold;
}

inline std::vector<std::string> select_minority_tiles(std::span<const TileRecord> tiles,
                                                      const ClassTaxonomy& taxonomy,
                                                      const OversamplePolicy& policy) {
  policy.validate();
  std::vector<std::string> out;
  for (const auto& t : tiles) {
    if (minority_dominated(t.annotations, taxonomy, policy.dominance_threshold)) {
      out.push_back(t.tile_id);
    }
  }
  return out;
}

/// Fixes the random parameters of `op` for one tile. Depends only on
/// (seed, tile_id, op), never on iteration order.
inline AppliedAugmentation sample_augmentation(const AugmentationOp& op, std::uint64_t seed,
                                               const std::string& tile_id) {
  AppliedAugmentation applied{op.kind, 0.0, 1.0};
  if (op.kind == AugmentationKind::brightness_contrast) {
    Rng rng(derive_seed(derive_seed(seed, "augment"), tile_id + "~" + std::string(to_string(op.kind))));
    applied.brightness_delta = rng.uniform(-op.max_brightness_delta, op.max_brightness_delta);
    applied.contrast = rng.uniform(op.min_contrast, op.max_contrast);
  }
  return applied;
}

/// v' = contrast * (v - 128) + 128 + delta * 255, rounded and clamped to
/// [0, 255]. An alpha channel (4th) is left alone.
inline Image adjust_brightness_contrast(const Image& src, double delta, double contrast) {
  Image out = src;
  const int color_channels = src.channels() == 4 ? 3 : src.channels();
  const double shift = 128.0 + delta * 255.0;
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      auto px = out.pixel(x, y);
      for (int c = 0; c < color_channels; ++c) {
        const double v = contrast * (static_cast<double>(px[c]) - 128.0) + shift;
        px[c] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
      }
    }
  }
  return out;
}

struct AugmentedTile {
  Image pixels;
  std::vector<Annotation> annotations;
};

inline std::vector<Annotation> augment_annotations(std::span<const Annotation> annotations,
                                                   AugmentationKind kind, int width, int height,
                                                   const std::string& new_image_id = {}) {
  if (kind == AugmentationKind::rotate_90 && width != height) throw NonSquareRotation();
  const auto t = augmentation_transform(kind, width, height);
  std::vector<Annotation> out;
  out.reserve(annotations.size());
  for (const auto& a : annotations) {
    out.push_back({new_image_id.empty() ? a.image_id : new_image_id, a.class_name,
                   apply_transform(t, a.box)});
  }
  return out;
}

inline Image augment_pixels(const Image& tile, const AppliedAugmentation& op) {
  switch (op.kind) {
    case AugmentationKind::horizontal_mirror: return mirror_horizontal(tile);
    case AugmentationKind::vertical_mirror: return mirror_vertical(tile);
    case AugmentationKind::rotate_90:
      if (tile.width() != tile.height()) throw NonSquareRotation();
      return rotate_clockwise(tile);
    case AugmentationKind::brightness_contrast:
      return adjust_brightness_contrast(tile, op.brightness_delta, op.contrast);
  }
  return tile;
}

/// Applies one augmentation to a tile and its boxes. Labels and counts are
/// preserved; geometric ops move boxes by the same isometry as the pixels.
inline AugmentedTile augment_tile(const Image& tile, std::span<const Annotation> annotations,
                                  const AppliedAugmentation& op) {
  if (op.kind == AugmentationKind::rotate_90 && tile.width() != tile.height()) {
    throw NonSquareRotation();
  }
  return {augment_pixels(tile, op),
          augment_annotations(annotations, op.kind, tile.width(), tile.height())};
}

inline std::string augmented_tile_id(const std::string& tile_id, AugmentationKind kind) {
  return tile_id + "~" + std::string(to_string(kind));
}

/// Training manifest plus one augmented copy of every minority-dominated tile
/// per configured op. Originals come first, in input order; augmented records
/// follow in (tile, op) order. Tiles that are themselves augmented copies are
/// never augmented again. Only records are produced; pixels come from
/// render_augmented_tile.
inline TileManifest build_augmented_set(const TileManifest& train, const ClassTaxonomy& taxonomy,
                                        const OversamplePolicy& policy) {
  policy.validate();
  TileManifest out = train;
  for (const auto& t : train.tiles) {
    if (t.provenance) continue;
    if (!minority_dominated(t.annotations, taxonomy, policy.dominance_threshold)) continue;
    for (const auto& op : policy.ops) {
      const auto applied = sample_augmentation(op, policy.seed, t.tile_id);
      TileRecord rec;
      rec.tile_id = augmented_tile_id(t.tile_id, op.kind);
      rec.image_id = t.image_id;
      rec.offset = t.offset;
      const bool swap = op.kind == AugmentationKind::rotate_90;
      rec.width = swap ? t.height : t.width;
      rec.height = swap ? t.width : t.height;
      rec.to_source =
          t.to_source.after(invert(augmentation_transform(op.kind, t.width, t.height)));
      rec.annotations = augment_annotations(t.annotations, op.kind, t.width, t.height, rec.tile_id);
      rec.path = "tiles_aug/" + rec.tile_id + ".png";
      rec.provenance = TileProvenance{t.tile_id, std::string(to_string(op.kind)),
                                      applied.brightness_delta, applied.contrast};
      out.tiles.push_back(std::move(rec));
    }
  }
  return out;
}

/// Pixels for an augmented record, from the pixels of its source tile.
inline Image render_augmented_tile(const TileRecord& augmented, const Image& source_tile) {
  if (!augmented.provenance) throw InputError(augmented.tile_id + " is not an augmented tile");
  const AppliedAugmentation op{augmentation_from_string(augmented.provenance->op),
                               augmented.provenance->brightness_delta,
                               augmented.provenance->contrast};
  return augment_pixels(source_tile, op);
}

}  // namespace waterbird
