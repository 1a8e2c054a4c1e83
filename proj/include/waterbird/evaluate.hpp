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
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "waterbird/dataset.hpp"
#include "waterbird/detection.hpp"
#include "waterbird/errors.hpp"
#include "waterbird/geometry.hpp"

namespace waterbird {

/// The frame id a detection is compared in: its tile for tile-frame
/// detections, its image otherwise. Ground truth uses Annotation::image_id.
inline const std::string& scope_of(const Detection& d) {
  return d.frame == Frame::tile ? d.provenance : d.image_id;
}

/// Detection indices in ranking order.
inline std::vector<std::size_t> ranking(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ranks_before(dets[a], dets[b]); });
  return order;
}

struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (detection, ground truth)
  std::vector<std::size_t> false_positives;                  // unmatched detections, rank order
  std::vector<std::size_t> false_negatives;                  // unmatched ground truth
  std::vector<bool> is_true_positive;                        // per detection index
};

/// Greedy one-to-one matching. Detections are taken in ranking order; each
/// claims the still-unmatched ground-truth box in its scope with the highest
/// IoU, provided that IoU is strictly above `iou_threshold` (and, when
/// class_aware, the classes agree). Equal IoUs go to the lower ground-truth
/// index.
inline MatchResult match_detections(const std::vector<Detection>& dets,
                                    const std::vector<Annotation>& gts, double iou_threshold,
                                    bool class_aware = true) {
  if (!dets.empty()) require_single_frame(dets);
  std::map<std::string, std::vector<std::size_t>> gts_by_scope;
  for (std::size_t g = 0; g < gts.size(); ++g) gts_by_scope[gts[g].image_id].push_back(g);

  MatchResult r;
  r.is_true_positive.assign(dets.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t di : ranking(dets)) {
    const Detection& d = dets[di];
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    auto it = gts_by_scope.find(scope_of(d));
    if (it != gts_by_scope.end()) {
      for (std::size_t g : it->second) {
        if (taken[g]) continue;
        if (class_aware && gts[g].class_name != d.class_name) continue;
        const double v = iou(d.box, gts[g].box);
        if (v > iou_threshold && v > best_iou) {
          best = g;
          best_iou = v;
        }
      }
    }
    if (best) {
      taken[*best] = true;
      r.matches.emplace_back(di, *best);
      r.is_true_positive[di] = true;
    } else {
      r.false_positives.push_back(di);
    }
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!taken[g]) r.false_negatives.push_back(g);
  }
  return r;
}

struct PRPoint {
  double recall;
  double precision;
};

/// Precision/recall after each detection of the ranked list.
struct PRCurve {
  std::string class_name;
  double iou_threshold = 0.5;
  std::size_t num_ground_truth = 0;
  std::vector<PRPoint> points;
  std::size_t true_positives = 0;   // over the whole list
  std::size_t false_positives = 0;
};

/// Builds the PR curve for one class from ranked true/false-positive flags.
inline PRCurve pr_curve_from_flags(const std::vector<bool>& ranked_tp, std::size_t num_gt,
                                   std::string class_name = {}, double iou_threshold = 0.5) {
  if (num_gt == 0) throw NoGroundTruth(class_name);
  PRCurve c;
  c.class_name = std::move(class_name);
  c.iou_threshold = iou_threshold;
  c.num_ground_truth = num_gt;
  c.points.reserve(ranked_tp.size());
  for (bool tp : ranked_tp) {
    (tp ? c.true_positives : c.false_positives) += 1;
    c.points.push_back({static_cast<double>(c.true_positives) / static_cast<double>(num_gt),
                        static_cast<double>(c.true_positives) /
                            static_cast<double>(c.true_positives + c.false_positives)});
  }
  return c;
}

/// PR curve for `class_name`: detections and ground truth of that class only,
/// matched class-aware at `iou_threshold`.
inline PRCurve pr_curve(const std::vector<Detection>& dets, const std::vector<Annotation>& gts,
                        const std::string& class_name, double iou_threshold) {
  std::vector<Detection> cd;
  std::vector<Annotation> cg;
  for (const auto& d : dets) {
    if (d.class_name == class_name) cd.push_back(d);
  }
  for (const auto& g : gts) {
    if (g.class_name == class_name) cg.push_back(g);
  }
  if (cg.empty()) throw NoGroundTruth(class_name);
  const MatchResult m = match_detections(cd, cg, iou_threshold, true);
  std::vector<bool> flags;
  flags.reserve(cd.size());
  for (std::size_t di : ranking(cd)) flags.push_back(m.is_true_positive[di]);
  return pr_curve_from_flags(flags, cg.size(), class_name, iou_threshold);
}

/// Number of recall steps; the grid is r = k / kRecallSteps for k = 0..kRecallSteps.
inline constexpr int kRecallSteps = 100;

/// Interpolated precision on the recall grid: entry k is the largest
/// precision among curve points with recall >= k/100, or 0 if there is none.
inline std::array<double, kRecallSteps + 1> interpolated_precision(const PRCurve& curve) {
  const auto& pts = curve.points;
  std::vector<double> suffix_max(pts.size() + 1, 0.0);
  for (std::size_t i = pts.size(); i-- > 0;) {
    suffix_max[i] = std::max(suffix_max[i + 1], pts[i].precision);
  }
  std::array<double, kRecallSteps + 1> out{};
  std::size_t first = 0;  // first point with recall >= r; recall is non-decreasing
  for (int k = 0; k <= kRecallSteps; ++k) {
    const double r = static_cast<double>(k) / kRecallSteps;
    while (first < pts.size() && pts[first].recall < r) ++first;
    out[k] = suffix_max[first];
  }
  return out;
}

/// Interpolated average precision: the sum over the 100 recall steps of
/// step width (0.01) times the interpolated precision at the step's upper
/// end. The common step width is factored out, so a perfect curve scores
/// exactly 1.
inline double interpolated_ap(const PRCurve& curve) {
  const auto p = interpolated_precision(curve);
  double sum = 0.0;
  for (int k = 1; k <= kRecallSteps; ++k) sum += p[k];
  return sum / kRecallSteps;
}

// ---------------------------------------------------------------------------
// Confusion matrix

struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> cells;  // [ground truth][predicted]
  std::vector<std::size_t> missed;              // per ground-truth class
  std::vector<std::size_t> ground_truth_totals;
  std::size_t unmatched_detections = 0;  // above the floor but matched to nothing

  std::size_t row_sum(std::size_t gt_class) const {
    return std::accumulate(cells[gt_class].begin(), cells[gt_class].end(), std::size_t{0}) +
           missed[gt_class];
  }
};

/// Localization first, classification second: detections scoring strictly
/// above `score_floor` are matched to ground truth class-agnostically (IoU
/// strictly above `iou_threshold`); each
/// matched pair lands in (true class, predicted class). The missed column is
/// the ground-truth total minus the matched total for that class.
inline ConfusionMatrix confusion_matrix(const std::vector<Detection>& dets,
                                        const std::vector<Annotation>& gts,
                                        const std::vector<std::string>& classes,
                                        double score_floor = 0.5, double iou_threshold = 0.5) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index[classes[i]] = i;
  auto class_index = [&](const std::string& c) {
    auto it = index.find(c);
    if (it == index.end()) throw InputError("class not in confusion-matrix class list: " + c);
    return it->second;
  };

  std::vector<Detection> confident;
  for (const auto& d : dets) {
    if (d.score > score_floor) confident.push_back(d);
  }
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.cells.assign(classes.size(), std::vector<std::size_t>(classes.size(), 0));
  cm.missed.assign(classes.size(), 0);
  cm.ground_truth_totals.assign(classes.size(), 0);
  for (const auto& g : gts) ++cm.ground_truth_totals[class_index(g.class_name)];

  const MatchResult m = match_detections(confident, gts, iou_threshold, false);
  std::vector<std::size_t> matched(classes.size(), 0);
  for (const auto& [di, gi] : m.matches) {
    const std::size_t row = class_index(gts[gi].class_name);
    ++cm.cells[row][class_index(confident[di].class_name)];
    ++matched[row];
  }
  for (std::size_t i = 0; i < classes.size(); ++i) {
    cm.missed[i] = cm.ground_truth_totals[i] - matched[i];
  }
  cm.unmatched_detections = m.false_positives.size();
  return cm;
}

// ---------------------------------------------------------------------------
// Full evaluation

struct EvalOptions {
  std::vector<double> iou_thresholds = {0.5, 0.75};
  double confusion_score_floor = 0.5;
  double confusion_iou_threshold = 0.5;
};

struct ClassThresholdResult {
  double ap = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  PRCurve curve;
};

struct ClassResult {
  std::string class_name;
  std::size_t num_ground_truth = 0;
  std::size_t num_detections = 0;
  std::vector<ClassThresholdResult> per_threshold;  // parallel to EvalReport::iou_thresholds
};

struct EvalReport {
  std::vector<double> iou_thresholds;
  std::vector<ClassResult> classes;         // classes with ground truth, in class-list order
  std::vector<std::string> excluded;        // classes with no ground truth
  std::vector<double> mean_ap;              // per threshold
  ConfusionMatrix confusion;
};

inline EvalReport evaluate(const std::vector<Detection>& dets, const std::vector<Annotation>& gts,
                           const std::vector<std::string>& classes, const EvalOptions& opt = {}) {
  if (!dets.empty()) require_single_frame(dets);
  EvalReport report;
  report.iou_thresholds = opt.iou_thresholds;
  report.mean_ap.assign(opt.iou_thresholds.size(), 0.0);
  for (const auto& c : classes) {
    std::size_t n_gt = 0, n_det = 0;
    for (const auto& g : gts) n_gt += g.class_name == c;
    for (const auto& d : dets) n_det += d.class_name == c;
    if (n_gt == 0) {
      report.excluded.push_back(c);
      continue;
    }
    ClassResult cr{c, n_gt, n_det, {}};
    for (double t : opt.iou_thresholds) {
      PRCurve curve = pr_curve(dets, gts, c, t);
      ClassThresholdResult r;
      r.ap = interpolated_ap(curve);
      r.tp = curve.true_positives;
      r.fp = curve.false_positives;
      r.fn = n_gt - curve.true_positives;
      r.curve = std::move(curve);
      cr.per_threshold.push_back(std::move(r));
    }
    report.classes.push_back(std::move(cr));
  }
  if (!report.classes.empty()) {
    for (std::size_t t = 0; t < opt.iou_thresholds.size(); ++t) {
      double sum = 0.0;
      for (const auto& cr : report.classes) sum += cr.per_threshold[t].ap;
      report.mean_ap[t] = sum / static_cast<double>(report.classes.size());
    }
  }
  report.confusion = confusion_matrix(dets, gts, classes, opt.confusion_score_floor,
                                      opt.confusion_iou_threshold);
  return report;
}

/// Shortest decimal text that round-trips to the same double.
inline std::string format_number(double v) { return nlohmann::json(v).dump(); }

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& cr : r.classes) {
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t t = 0; t < r.iou_thresholds.size(); ++t) {
      const auto& pt = cr.per_threshold[t];
      per.push_back({{"iou_threshold", r.iou_thresholds[t]},
                     {"ap", pt.ap},
                     {"tp", pt.tp},
                     {"fp", pt.fp},
                     {"fn", pt.fn}});
    }
    classes.push_back({{"class", cr.class_name},
                       {"ground_truth", cr.num_ground_truth},
                       {"detections", cr.num_detections},
                       {"results", per}});
  }
  nlohmann::json map = nlohmann::json::array();
  for (std::size_t t = 0; t < r.iou_thresholds.size(); ++t) {
    map.push_back({{"iou_threshold", r.iou_thresholds[t]}, {"map", r.mean_ap[t]}});
  }
  const auto& cm = r.confusion;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < cm.classes.size(); ++i) {
    rows.push_back({{"ground_truth", cm.classes[i]},
                    {"predicted", cm.cells[i]},
                    {"missed", cm.missed[i]},
                    {"total", cm.ground_truth_totals[i]}});
  }
  return {{"iou_thresholds", r.iou_thresholds},
          {"classes", classes},
          {"excluded_classes", r.excluded},
          {"mean_ap", map},
          {"confusion",
           {{"classes", cm.classes},
            {"rows", rows},
            {"unmatched_detections", cm.unmatched_detections}}}};
}

/// class,iou_threshold,ap,tp,fp,fn,ground_truth
inline void write_ap_csv(std::ostream& out, const EvalReport& r) {
  out << "class,iou_threshold,ap,tp,fp,fn,ground_truth\n";
  for (const auto& cr : r.classes) {
    for (std::size_t t = 0; t < r.iou_thresholds.size(); ++t) {
      const auto& pt = cr.per_threshold[t];
      out << cr.class_name << ',' << format_number(r.iou_thresholds[t]) << ','
          << format_number(pt.ap) << ',' << pt.tp << ',' << pt.fp << ',' << pt.fn << ','
          << cr.num_ground_truth << '\n';
    }
  }
  for (std::size_t t = 0; t < r.iou_thresholds.size(); ++t) {
    out << "mAP," << format_number(r.iou_thresholds[t]) << ',' << format_number(r.mean_ap[t])
        << ",,,,\n";
  }
}

/// Rows are ground-truth classes; columns are predicted classes then "missed".
inline void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm) {
  out << "ground_truth";
  for (const auto& c : cm.classes) out << ',' << c;
  out << ",missed\n";
  for (std::size_t i = 0; i < cm.classes.size(); ++i) {
    out << cm.classes[i];
    for (std::size_t n : cm.cells[i]) out << ',' << n;
    out << ',' << cm.missed[i] << '\n';
  }
}

inline void write_pr_csv(std::ostream& out, const PRCurve& c) {
  out << "rank,recall,precision\n";
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    out << i + 1 << ',' << format_number(c.points[i].recall) << ','
        << format_number(c.points[i].precision) << '\n';
  }
}

}  // namespace waterbird
