#pragma once

// Rotated-detection evaluation: greedy matching by rotated IoU, VOC07/VOC12
// average precision, per-class mAP and mean Average Orientation Error.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orp/geometry.hpp"

namespace orp {

struct Detection {
  std::string image_id;
  int class_id = 0;
  QuadBox box{};
  double confidence = 0.0;
};

struct GtRecord {
  std::string image_id;
  int class_id = 0;
  QuadBox box{};
  bool difficult = false;
};

struct MatchEntry {
  std::size_t det_index = 0;
  bool true_positive = false;
  int gt_index = -1;  // index into the gts list; -1 for FP
  double iou = 0.0;
};

struct ClassMatches {
  int class_id = 0;
  std::vector<MatchEntry> entries;  // in descending-confidence order
  std::size_t n_gt = 0;             // non-difficult GT count
};

// Aspect-ratio band within which a GT counts as square-like, making its
// orientation 90-degree ambiguous.
inline constexpr double kSquareAspectTol = 1.05;

// Orientation error between two canonical rectangle angles, in degrees:
// modulo-180 wraparound, additionally reduced modulo 90 for square-like GTs.
inline double orientation_error_deg(double pred_angle_deg, double gt_angle_deg,
                                    double gt_aspect_ratio) {
  double d = std::abs(pred_angle_deg - gt_angle_deg);
  d = std::fmod(d, 180.0);
  d = std::min(d, 180.0 - d);
  if (gt_aspect_ratio <= kSquareAspectTol) {
    d = std::fmod(d, 90.0);
    d = std::min(d, 90.0 - d);
  }
  return d;
}

// VOC-style greedy matching: detections in descending confidence, each takes
// the unmatched same-class same-image GT with the highest rotated IoU above
// the threshold. Duplicates become false positives. Difficult GTs neither
// count toward n_gt nor consume matches.
inline std::vector<ClassMatches> match_detections(const std::vector<Detection>& dets,
                                                  const std::vector<GtRecord>& gts,
                                                  double iou_threshold = 0.5) {
  if (iou_threshold <= 0.0 || iou_threshold >= 1.0) {
    throw InvalidArgument("iou_threshold must be in (0,1)");
  }
  std::map<int, ClassMatches> per_class;
  for (const GtRecord& g : gts) {
    auto& cm = per_class[g.class_id];
    cm.class_id = g.class_id;
    if (!g.difficult) ++cm.n_gt;
  }

  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });

  std::vector<bool> gt_used(gts.size(), false);
  for (std::size_t di : order) {
    const Detection& d = dets[di];
    auto& cm = per_class[d.class_id];
    cm.class_id = d.class_id;
    int best_gt = -1;
    double best_iou = 0.0;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      const GtRecord& g = gts[gi];
      if (g.class_id != d.class_id || g.image_id != d.image_id) continue;
      const double iou = quad_iou(d.box, g.box);
      if (iou > best_iou) {
        best_iou = iou;
        best_gt = static_cast<int>(gi);
      }
    }
    MatchEntry e;
    e.det_index = di;
    e.iou = best_iou;
    if (best_gt >= 0 && best_iou >= iou_threshold) {
      const GtRecord& g = gts[static_cast<std::size_t>(best_gt)];
      if (g.difficult) {
        continue;  // matches a difficult GT: ignored entirely
      }
      if (!gt_used[static_cast<std::size_t>(best_gt)]) {
        gt_used[static_cast<std::size_t>(best_gt)] = true;
        e.true_positive = true;
        e.gt_index = best_gt;
      }
    }
    cm.entries.push_back(e);
  }

  std::vector<ClassMatches> out;
  out.reserve(per_class.size());
  for (auto& [cls, cm] : per_class) out.push_back(std::move(cm));
  return out;
}

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

inline std::vector<PrPoint> pr_curve(const ClassMatches& cm) {
  std::vector<PrPoint> pr;
  std::size_t tp = 0, fp = 0;
  for (const MatchEntry& e : cm.entries) {
    if (e.true_positive) {
      ++tp;
    } else {
      ++fp;
    }
    PrPoint p;
    p.recall = cm.n_gt > 0 ? static_cast<double>(tp) / static_cast<double>(cm.n_gt) : 0.0;
    p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    pr.push_back(p);
  }
  return pr;
}

enum class ApMetric { kVoc07, kVoc12 };

// VOC07: mean of max precision at 11 recall levels. VOC12: area under the
// monotone-envelope PR curve.
inline double average_precision(const std::vector<PrPoint>& pr, ApMetric metric) {
  if (pr.empty()) return 0.0;
  if (metric == ApMetric::kVoc07) {
    double sum = 0.0;
    for (int i = 0; i <= 10; ++i) {
      const double r = 0.1 * i;
      double pmax = 0.0;
      for (const PrPoint& p : pr) {
        if (p.recall >= r - 1e-12) pmax = std::max(pmax, p.precision);
      }
      sum += pmax;
    }
    return sum / 11.0;
  }
  // Monotone envelope over recall, integrated.
  std::vector<double> rec{0.0}, prec{0.0};
  for (const PrPoint& p : pr) {
    rec.push_back(p.recall);
    prec.push_back(p.precision);
  }
  rec.push_back(rec.back());
  prec.push_back(0.0);
  for (std::size_t i = prec.size() - 1; i-- > 0;) prec[i] = std::max(prec[i], prec[i + 1]);
  double ap = 0.0;
  for (std::size_t i = 1; i < rec.size(); ++i) ap += (rec[i] - rec[i - 1]) * prec[i];
  return ap;
}

// mAOE over true positives only: per-class mean orientation error, then mean
// over classes with at least one TP. Absent (nullopt) when there are no TPs.
inline std::optional<double> maoe(const std::vector<ClassMatches>& matches,
                                  const std::vector<Detection>& dets,
                                  const std::vector<GtRecord>& gts) {
  std::vector<double> class_means;
  for (const ClassMatches& cm : matches) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const MatchEntry& e : cm.entries) {
      if (!e.true_positive) continue;
      const Detection& d = dets[e.det_index];
      const GtRecord& g = gts[static_cast<std::size_t>(e.gt_index)];
      const RotatedRect pr = min_area_rect(PointSet(d.box.begin(), d.box.end()));
      const RotatedRect gr = min_area_rect(PointSet(g.box.begin(), g.box.end()));
      const double aspect = gr.height > kGeomTol ? gr.width / gr.height : 1e9;
      sum += orientation_error_deg(pr.angle_deg, gr.angle_deg, aspect);
      ++n;
    }
    if (n > 0) class_means.push_back(sum / static_cast<double>(n));
  }
  if (class_means.empty()) return std::nullopt;
  double total = 0.0;
  for (double m : class_means) total += m;
  return total / static_cast<double>(class_means.size());
}

struct EvalReport {
  std::map<int, double> ap_per_class;
  double map = 0.0;
  std::optional<double> maoe_deg;
  std::vector<ClassMatches> matches;
};

inline EvalReport evaluate(const std::vector<Detection>& dets, const std::vector<GtRecord>& gts,
                           ApMetric metric = ApMetric::kVoc07, double iou_threshold = 0.5,
                           bool with_maoe = false) {
  EvalReport rep;
  rep.matches = match_detections(dets, gts, iou_threshold);
  double sum = 0.0;
  std::size_t n = 0;
  for (const ClassMatches& cm : rep.matches) {
    if (cm.n_gt == 0) continue;  // class never appears in GT: skipped
    const double ap = average_precision(pr_curve(cm), metric);
    rep.ap_per_class[cm.class_id] = ap;
    sum += ap;
    ++n;
  }
  rep.map = n > 0 ? sum / static_cast<double>(n) : 0.0;
  if (with_maoe) rep.maoe_deg = maoe(rep.matches, dets, gts);
  return rep;
}

}  // namespace orp
