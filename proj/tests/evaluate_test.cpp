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
#include "waterbird/evaluate.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "waterbird/merge.hpp"
#include "waterbird/oracle.hpp"
#include "waterbird/random.hpp"
#include "waterbird/taxonomy.hpp"

namespace waterbird {
namespace {

Detection det(const std::string& cls, BoundingBox box, double score, const std::string& tile = "t") {
  return {cls, box, score, Frame::tile, tile, {}};
}

Annotation gt(const std::string& cls, BoundingBox box, const std::string& tile = "t") {
  return {tile, cls, box};
}

TEST(MatchTest, Examples) {
  const BoundingBox b(0, 0, 10, 10);
  auto r = match_detections({det("Other", b, 0.9)}, {gt("Other", b)}, 0.5);
  EXPECT_EQ(r.matches.size(), 1u);
  EXPECT_TRUE(r.false_positives.empty());
  EXPECT_TRUE(r.false_negatives.empty());

  r = match_detections({det("Other", b, 0.6), det("Other", b, 0.9)}, {gt("Other", b)}, 0.5);
  ASSERT_EQ(r.matches.size(), 1u);
  EXPECT_EQ(r.matches[0].first, 1u);
  EXPECT_EQ(r.false_positives, std::vector<std::size_t>{0});

  // IoU of [0,0,10,10] and [0,0,10,4.5] is 0.45.
  r = match_detections({det("Other", BoundingBox(0, 0, 10, 4.5), 0.9)}, {gt("Other", b)}, 0.5);
  EXPECT_EQ(r.false_positives.size(), 1u);
  EXPECT_EQ(r.false_negatives.size(), 1u);

  // IoU exactly at the threshold is not enough: [0,0,10,5] covers half the box.
  r = match_detections({det("Other", BoundingBox(0, 0, 10, 5), 0.9)}, {gt("Other", b)}, 0.5);
  EXPECT_TRUE(r.matches.empty());
  EXPECT_EQ(match_detections({det("Other", BoundingBox(0, 0, 10, 5), 0.9)}, {gt("Other", b)}, 0.4999)
                .matches.size(),
            1u);

  // Class mismatch matters only when class-aware; scope must agree.
  EXPECT_TRUE(match_detections({det("White Ibis Adult", b, 0.9)}, {gt("Other", b)}, 0.5).matches.empty());
  EXPECT_EQ(match_detections({det("White Ibis Adult", b, 0.9)}, {gt("Other", b)}, 0.5, false).matches.size(), 1u);
  EXPECT_TRUE(match_detections({det("Other", b, 0.9, "u")}, {gt("Other", b)}, 0.5).matches.empty());
}

TEST(PrCurveTest, HandTrace) {
  const auto c = pr_curve_from_flags({true, false, true, true}, 3);
  ASSERT_EQ(c.points.size(), 4u);
  const double recall[] = {1.0 / 3, 1.0 / 3, 2.0 / 3, 1.0};
  const double precision[] = {1.0, 0.5, 2.0 / 3, 0.75};
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(c.points[i].recall, recall[i]);
    EXPECT_DOUBLE_EQ(c.points[i].precision, precision[i]);
  }
  // Interpolated precision is 1 up to recall 1/3 and 0.75 beyond.
  EXPECT_DOUBLE_EQ(interpolated_ap(c), (33 * 1.0 + 67 * 0.75) / 100);
}

TEST(PrCurveTest, Extremes) {
  const auto perfect = pr_curve_from_flags({true, true, true}, 3);
  EXPECT_EQ(perfect.points.back().recall, 1.0);
  EXPECT_EQ(perfect.points.back().precision, 1.0);
  EXPECT_EQ(interpolated_ap(perfect), 1.0);

  const auto wrong = pr_curve_from_flags({false, false}, 3);
  for (const auto& p : wrong.points) {
    EXPECT_EQ(p.recall, 0.0);
    EXPECT_EQ(p.precision, 0.0);
  }
  EXPECT_EQ(interpolated_ap(wrong), 0.0);

  const auto half = pr_curve_from_flags(std::vector<bool>(50, true), 100);
  EXPECT_NEAR(interpolated_ap(half), 0.50, 0.01);

  EXPECT_THROW(pr_curve_from_flags({true}, 0), NoGroundTruth);
  EXPECT_EQ(interpolated_ap(pr_curve_from_flags({}, 4)), 0.0);
}

TEST(ApTest, MatchesBruteForceOnRandomInstances) {
  Rng rng(314);
  for (int round = 0; round < 2000; ++round) {
    const std::size_t num_gt = 1 + rng.below(12);
    std::vector<bool> flags;
    std::size_t tps = 0;
    for (std::size_t i = rng.below(25); i > 0; --i) {
      const bool tp = tps < num_gt && rng.bernoulli(0.6);
      tps += tp;
      flags.push_back(tp);
    }
    const double ap = interpolated_ap(pr_curve_from_flags(flags, num_gt));
    ASSERT_EQ(ap, testing::ref_interpolated_ap(flags, num_gt)) << round;
    ASSERT_GE(ap, 0.0);
    ASSERT_LE(ap, 1.0);
  }
}

TEST(ApTest, DetectionLevelMatchesReferencePipeline) {
  Rng rng(2718);
  const std::vector<std::string> classes{"Other", "White Ibis Adult"};
  for (int round = 0; round < 300; ++round) {
    std::vector<Annotation> gts;
    std::vector<Detection> dets;
    for (const char* tile : {"t0", "t1"}) {
      for (std::size_t i = 1 + rng.below(6); i > 0; --i) {
        gts.push_back(gt(classes[rng.below(2)], testing::random_box(rng, 200, 200, 10, 60), tile));
      }
    }
    for (const auto& g : gts) {
      for (std::size_t k = rng.below(3); k > 0; --k) {
        const double dx = rng.uniform(-6, 6), dy = rng.uniform(-6, 6);
        dets.push_back(det(rng.bernoulli(0.85) ? g.class_name : classes[rng.below(2)],
                           BoundingBox(g.box.x_min() + dx, g.box.y_min() + dy,
                                       g.box.x_max() + dx, g.box.y_max() + dy),
                           static_cast<double>(rng.below(10)) / 9.0, g.image_id));
      }
    }
    for (const auto& c : classes) {
      std::vector<Annotation> cg;
      for (const auto& g : gts) {
        if (g.class_name == c) cg.push_back(g);
      }
      if (cg.empty()) continue;
      for (double thr : {0.5, 0.75}) {
        const auto flags = testing::ref_ranked_flags(dets, gts, c, thr);
        ASSERT_EQ(interpolated_ap(pr_curve(dets, gts, c, thr)),
                  testing::ref_interpolated_ap(flags, cg.size()))
            << round << " " << c << "@" << thr;
      }
    }
  }
}

TEST(ConfusionTest, Examples) {
  const std::vector<std::string> classes{"White Ibis Adult", "Mixed Egret", "Other"};
  const BoundingBox b(0, 0, 10, 10);
  const std::vector<Annotation> gts{gt("White Ibis Adult", b), gt("Mixed Egret", BoundingBox(50, 50, 60, 60))};

  const auto perfect = confusion_matrix({det("White Ibis Adult", b, 0.9),
                                         det("Mixed Egret", BoundingBox(50, 50, 60, 60), 0.9)},
                                        gts, classes);
  EXPECT_EQ(perfect.cells[0][0], 1u);
  EXPECT_EQ(perfect.cells[1][1], 1u);
  EXPECT_EQ(perfect.missed, (std::vector<std::size_t>{0, 0, 0}));

  // IoU 0.8 with the White Ibis, predicted Mixed Egret.
  const auto confused = confusion_matrix({det("Mixed Egret", BoundingBox(0, 0, 10, 8), 0.9)}, gts, classes);
  EXPECT_EQ(confused.cells[0][1], 1u);
  EXPECT_EQ(confused.missed[1], 1u);

  // Score exactly at the floor does not count.
  const auto floor = confusion_matrix({det("White Ibis Adult", b, 0.5)}, gts, classes);
  EXPECT_EQ(floor.missed[0], 1u);

  const auto none = confusion_matrix({}, gts, classes);
  EXPECT_EQ(none.missed, (std::vector<std::size_t>{1, 1, 0}));
}

TEST(ConfusionTest, RowsConserveGroundTruth) {
  Rng rng(55);
  const auto classes = ClassTaxonomy::waterbirds().trained_classes();
  for (int round = 0; round < 300; ++round) {
    std::vector<Annotation> gts;
    std::vector<Detection> dets;
    for (std::size_t i = rng.below(30); i > 0; --i) {
      gts.push_back(gt(classes[rng.below(classes.size())], testing::random_box(rng, 300, 300, 5, 50)));
    }
    for (std::size_t i = rng.below(40); i > 0; --i) {
      dets.push_back(det(classes[rng.below(classes.size())], testing::random_box(rng, 300, 300, 5, 50),
                         rng.uniform()));
    }
    const auto cm = confusion_matrix(dets, gts, classes);
    for (std::size_t r = 0; r < classes.size(); ++r) {
      ASSERT_EQ(cm.row_sum(r), cm.ground_truth_totals[r]);
    }
  }
}

std::vector<TileRecord> labelled_tiles(std::size_t per_tile, std::size_t tiles,
                                       const std::vector<std::string>& classes, std::uint64_t seed) {
  std::vector<TileRecord> out;
  for (std::size_t i = 0; i < tiles; ++i) {
    TileRecord t;
    t.tile_id = "img_" + std::to_string(400 * i) + "_0";
    t.image_id = "img";
    t.width = t.height = 640;
    t.annotations = testing::synthetic_birds(per_tile, 640, 640, 15, 80, classes, seed + i, t.tile_id);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Annotation> flatten(const std::vector<TileRecord>& tiles) {
  std::vector<Annotation> out;
  for (const auto& t : tiles) out.insert(out.end(), t.annotations.begin(), t.annotations.end());
  return out;
}

TEST(OracleTest, NoiselessEqualsGroundTruth) {
  const auto classes = ClassTaxonomy::waterbirds().trained_classes();
  const auto tiles = labelled_tiles(20, 3, classes, 1);
  const auto dets = oracle_detect(tiles, classes, {});
  const auto gts = flatten(tiles);
  ASSERT_EQ(dets.size(), gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    EXPECT_EQ(dets[i].box, gts[i].box);
    EXPECT_EQ(dets[i].class_name, gts[i].class_name);
    EXPECT_EQ(dets[i].provenance, gts[i].image_id);
    EXPECT_EQ(dets[i].score, 1.0);
  }
  const auto report = evaluate(dets, gts, classes);
  for (const auto& c : report.classes) {
    for (const auto& t : c.per_threshold) EXPECT_EQ(t.ap, 1.0) << c.class_name;
  }
}

TEST(OracleTest, DropHalfMatchesGolden) {
  const std::vector<std::string> classes{"Laughing Gull Adult"};
  const auto tiles = labelled_tiles(100, 1, classes, 5);
  OracleConfig cfg;
  cfg.drop_rate = 0.5;
  cfg.seed = 2026;
  const auto dets = oracle_detect(tiles, classes, cfg);
  EXPECT_GE(dets.size(), 35u);
  EXPECT_LE(dets.size(), 65u);
  std::ostringstream wire;
  write_detections(wire, dets);
  const std::string golden_path = WATERBIRD_GOLDEN_DIR "/oracle_drop_half.jsonl";
  if (std::getenv("WATERBIRD_UPDATE_GOLDEN")) std::ofstream(golden_path, std::ios::binary) << wire.str();
  std::ifstream golden(golden_path, std::ios::binary);
  ASSERT_TRUE(golden) << "missing golden file";
  std::ostringstream expected;
  expected << golden.rdbuf();
  EXPECT_EQ(wire.str(), expected.str());

  const auto curve = pr_curve(dets, flatten(tiles), classes[0], 0.5);
  EXPECT_DOUBLE_EQ(curve.points.back().recall, static_cast<double>(dets.size()) / 100);
  EXPECT_EQ(curve.points.back().precision, 1.0);
}

TEST(OracleTest, FullMisclassificationIsOffDiagonal) {
  const std::vector<std::string> classes{"White Ibis Adult", "Mixed Egret"};
  const auto tiles = labelled_tiles(30, 2, classes, 8);
  OracleConfig cfg;
  cfg.misclass_rate = 1.0;
  cfg.seed = 4;
  const auto cm = confusion_matrix(oracle_detect(tiles, classes, cfg), flatten(tiles), classes, 0.0);
  EXPECT_EQ(cm.cells[0][0], 0u);
  EXPECT_EQ(cm.cells[1][1], 0u);
  EXPECT_EQ(cm.cells[0][1], cm.ground_truth_totals[0]);
  EXPECT_EQ(cm.cells[1][0], cm.ground_truth_totals[1]);
}

TEST(OracleTest, DeterministicPerTile) {
  const auto classes = ClassTaxonomy::waterbirds().trained_classes();
  const auto tiles = labelled_tiles(10, 4, classes, 2);
  OracleConfig cfg{3.0, 0.2, 0.5, 0.1, 77};
  const auto all = oracle_detect(tiles, classes, cfg);
  std::vector<TileRecord> reversed(tiles.rbegin(), tiles.rend());
  auto again = oracle_detect(reversed, classes, cfg);
  std::sort(again.begin(), again.end(), ranks_before);
  auto sorted = all;
  std::sort(sorted.begin(), sorted.end(), ranks_before);
  EXPECT_EQ(sorted, again);
  for (const auto& d : all) {
    EXPECT_TRUE(BoundingBox(0, 0, 640, 640).contains(d.box));
    EXPECT_GE(d.score, 0.0);
    EXPECT_LT(d.score, 1.0);
  }
}

TEST(EvaluateTest, Examples) {
  const auto classes = ClassTaxonomy::waterbirds().trained_classes();
  const auto tiles = labelled_tiles(16, 2, classes, 12);
  const auto gts = flatten(tiles);

  const auto perfect = evaluate(oracle_detect(tiles, classes, {}), gts, classes);
  EXPECT_EQ(perfect.mean_ap, (std::vector<double>{1.0, 1.0}));
  EXPECT_TRUE(perfect.excluded.empty());

  const auto empty = evaluate({}, gts, classes);
  EXPECT_EQ(empty.mean_ap, (std::vector<double>{0.0, 0.0}));
  for (std::size_t r = 0; r < classes.size(); ++r) {
    EXPECT_EQ(empty.confusion.missed[r], empty.confusion.ground_truth_totals[r]);
  }

  // A class with no ground truth is excluded from the mean.
  std::vector<Annotation> only_other;
  for (const auto& g : gts) {
    if (g.class_name == "Other") only_other.push_back(g);
  }
  const auto partial = evaluate(oracle_detect(tiles, classes, {}), only_other, classes);
  EXPECT_EQ(partial.classes.size(), 1u);
  EXPECT_EQ(partial.excluded.size(), 15u);
}

TEST(EvaluateTest, JitterMonotoneInThreshold) {
  const auto classes = ClassTaxonomy::waterbirds().trained_classes();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto tiles = labelled_tiles(25, 3, classes, 100 + seed);
    OracleConfig cfg;
    cfg.jitter = 8.0;
    cfg.seed = seed;
    const auto report = evaluate(oracle_detect(tiles, classes, cfg), flatten(tiles), classes);
    for (const auto& c : report.classes) {
      ASSERT_LE(c.per_threshold[1].ap, c.per_threshold[0].ap) << c.class_name;
    }
  }
}

TEST(EvaluateTest, CsvOutputs) {
  const std::vector<std::string> classes{"Other", "White Ibis Adult"};
  const auto tiles = labelled_tiles(4, 1, {"Other"}, 3);
  const auto report = evaluate(oracle_detect(tiles, classes, {}), flatten(tiles), classes);
  std::ostringstream ap, cm;
  write_ap_csv(ap, report);
  write_confusion_csv(cm, report.confusion);
  EXPECT_NE(ap.str().find("Other,0.5,1.0"), std::string::npos) << ap.str();
  EXPECT_EQ(cm.str().substr(0, cm.str().find('\n')), "ground_truth,Other,White Ibis Adult,missed");
}

}  // namespace
}  // namespace waterbird
