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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "waterbird/detection.hpp"
#include "waterbird/errors.hpp"
#include "waterbird/geometry.hpp"
#include "waterbird/random.hpp"
#include "waterbird/tiler.hpp"

namespace waterbird {

/// Noise model for the oracle detector, a test double standing in for a
/// trained network.
struct OracleConfig {
  double jitter = 0.0;         // max per-coordinate displacement, pixels
  double drop_rate = 0.0;      // probability a ground-truth box is not detected
  double spurious_rate = 0.0;  // probability of one false box per tile
  double misclass_rate = 0.0;  // probability a detection carries a wrong class
  std::uint64_t seed = 0;

  bool noiseless() const {
    return jitter == 0.0 && drop_rate == 0.0 && spurious_rate == 0.0 && misclass_rate == 0.0;
  }

  void validate() const {
    auto rate = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!(jitter >= 0.0)) throw InputError("oracle jitter must be >= 0");
    if (!rate(drop_rate) || !rate(spurious_rate) || !rate(misclass_rate)) {
      throw InputError("oracle rates must be in [0, 1]");
    }
  }
};

/// Perturbed copies of each tile's ground truth, in the tile frame.
///
/// With a noiseless config every ground-truth box comes back unchanged with
/// score 1. Otherwise kept boxes score in [0.5, 1), spurious boxes in
/// [0, 0.8), and a misclassified box takes a different class drawn uniformly
/// from `classes`. Draws for a tile depend only on (seed, tile_id).
inline std::vector<Detection> oracle_detect(std::span<const TileRecord> tiles,
                                            const std::vector<std::string>& classes,
                                            const OracleConfig& cfg) {
  cfg.validate();
  std::vector<Detection> out;
  const bool exact = cfg.noiseless();
  for (const auto& tile : tiles) {
    Rng rng(derive_seed(derive_seed(cfg.seed, "oracle"), tile.tile_id));
    const BoundingBox bounds = tile.bounds();
    for (const auto& gt : tile.annotations) {
      if (exact) {
        out.push_back({gt.class_name, gt.box, 1.0, Frame::tile, tile.tile_id, {}});
        continue;
      }
      if (rng.bernoulli(cfg.drop_rate)) continue;
      BoundingBox box = gt.box;
      if (cfg.jitter > 0.0) {
        auto shift = [&](double v, double hi) {
          return std::clamp(v + rng.uniform(-cfg.jitter, cfg.jitter), 0.0, hi);
        };
        const double x0 = shift(gt.box.x_min(), bounds.x_max());
        const double y0 = shift(gt.box.y_min(), bounds.y_max());
        const double x1 = shift(gt.box.x_max(), bounds.x_max());
        const double y1 = shift(gt.box.y_max(), bounds.y_max());
        if (x0 < x1 && y0 < y1) box = BoundingBox(x0, y0, x1, y1);
      }
      std::string cls = gt.class_name;
      if (rng.bernoulli(cfg.misclass_rate) && classes.size() > 1) {
        std::vector<std::string> others;
        for (const auto& c : classes) {
          if (c != cls) others.push_back(c);
        }
        cls = others[rng.below(others.size())];
      }
      out.push_back({cls, box, 0.5 + 0.5 * rng.uniform(), Frame::tile, tile.tile_id, {}});
    }
    if (!exact && !classes.empty() && rng.bernoulli(cfg.spurious_rate)) {
      const double w = rng.uniform(10.0, std::min(60.0, bounds.x_max()));
      const double h = rng.uniform(10.0, std::min(60.0, bounds.y_max()));
      const double x = rng.uniform(0.0, bounds.x_max() - w);
      const double y = rng.uniform(0.0, bounds.y_max() - h);
      out.push_back({classes[rng.below(classes.size())], BoundingBox(x, y, x + w, y + h),
                     0.8 * rng.uniform(), Frame::tile, tile.tile_id, {}});
    }
  }
  return out;
}

}  // namespace waterbird
