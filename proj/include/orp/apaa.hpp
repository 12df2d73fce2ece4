#pragma once

// Adaptive Points Assessment and Assignment: the per-candidate quality
// measure Q (classification, localization, orientation, point-wise feature
// correlation) and the dynamic top-k positive-sample selection, plus the
// initialization-stage center assigner and a Max-IoU baseline.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "orp/geometry.hpp"
#include "orp/losses.hpp"

namespace orp {

inline constexpr std::size_t kContourSamples = 40;
inline constexpr std::size_t kDefaultFeatureDim = 8;

struct Candidate {
  PointSet point_set;
  std::vector<double> cls_prob;                 // per-class probability
  std::vector<std::vector<double>> features;    // N_p vectors of dimension D
  std::size_t source_bin = 0;
};

struct QualityWeights {
  double mu1 = 1.0;
  double mu2 = 0.3;
  double mu3 = 0.1;
};

// All components are losses/distances: LOWER total means HIGHER quality.
struct QualityScore {
  double q_cls = 0.0;
  double q_loc = 0.0;
  double q_ori = 0.0;
  double q_poc = 0.0;
  double total = 0.0;
};

inline double quality_cls(const Candidate& c, std::size_t gt_class, double alpha = 0.25,
                          double gamma = 2.0) {
  if (gt_class >= c.cls_prob.size()) throw InvalidArgument("gt_class out of range");
  return focal_loss(c.cls_prob[gt_class], 1, alpha, gamma).loss;
}

inline double quality_loc(const Candidate& c, const QuadBox& gt) {
  return 1.0 - polygon_giou(convex_hull(c.point_set), to_polygon(gt));
}

// Chamfer distance between equal-interval contour samplings of the
// candidate's min-area rectangle and the GT box.
inline double quality_ori(const Candidate& c, const QuadBox& gt) {
  const QuadBox pred = min_area_rect(c.point_set).corners();
  const auto pv = sample_contour_points(pred, kContourSamples);
  const auto gv = sample_contour_points(gt, kContourSamples);
  return chamfer_distance(pv, gv);
}

// Point-wise feature diversity: 1 - mean cosine between each unit feature
// vector and their mean. Invariant under positive per-vector rescaling.
inline double quality_poc(const Candidate& c) {
  const std::size_t np = c.features.size();
  if (np == 0) throw InvalidArgument("quality_poc needs feature vectors");
  const std::size_t d = c.features[0].size();
  std::vector<std::vector<double>> unit(np);
  std::vector<double> mean(d, 0.0);
  for (std::size_t k = 0; k < np; ++k) {
    const auto& e = c.features[k];
    if (e.size() != d) throw InvalidArgument("inconsistent feature dimensions");
    double n2 = 0.0;
    for (double v : e) n2 += v * v;
    const double n = std::sqrt(n2);
    if (n <= kGeomTol) throw InvalidArgument("zero-norm feature vector");
    unit[k].resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      unit[k][j] = e[j] / n;
      mean[j] += unit[k][j] / static_cast<double>(np);
    }
  }
  double mn = 0.0;
  for (double v : mean) mn += v * v;
  mn = std::sqrt(mn);
  if (mn <= kGeomTol) return 1.0;  // mean direction undefined: maximal diversity
  double cos_sum = 0.0;
  for (std::size_t k = 0; k < np; ++k) {
    double dp = 0.0;
    for (std::size_t j = 0; j < d; ++j) dp += unit[k][j] * mean[j];
    cos_sum += dp / mn;
  }
  return 1.0 - cos_sum / static_cast<double>(np);
}

inline QualityScore quality_total(const Candidate& c, const QuadBox& gt, std::size_t gt_class,
                                  const QualityWeights& w = {}, double focal_alpha = 0.25,
                                  double focal_gamma = 2.0) {
  QualityScore q;
  q.q_cls = quality_cls(c, gt_class, focal_alpha, focal_gamma);
  q.q_loc = quality_loc(c, gt);
  q.q_ori = quality_ori(c, gt);
  q.q_poc = quality_poc(c);
  q.total = q.q_cls + w.mu1 * q.q_loc + w.mu2 * q.q_ori + w.mu3 * q.q_poc;
  return q;
}

struct AssignmentResult {
  // Per object: indices of positive candidates (global candidate indices).
  std::vector<std::vector<std::size_t>> positives;
  // Per candidate: owner object index, or -1 for negative.
  std::vector<int> owner;
  std::vector<std::size_t> k_used;  // per object
  double sigma = 0.4;
};

// k = round(sigma * N_t), round-half-up, clamped to [1, N_t].
inline std::size_t dynamic_k(double sigma, std::size_t n_t) {
  if (n_t == 0) return 0;
  const auto k = static_cast<std::size_t>(std::floor(sigma * static_cast<double>(n_t) + 0.5));
  return std::clamp<std::size_t>(k, 1, n_t);
}

// Per object, sort its candidates ascending by Q.total (ties by candidate
// index) and take the top k as positives.
inline AssignmentResult dynamic_topk_assign(
    const std::vector<std::vector<std::size_t>>& candidates_per_object,
    const std::vector<QualityScore>& scores, std::size_t n_candidates, double sigma = 0.4) {
  if (sigma <= 0.0 || sigma > 1.0) throw InvalidArgument("sigma must be in (0,1]");
  AssignmentResult r;
  r.sigma = sigma;
  r.owner.assign(n_candidates, -1);
  r.positives.resize(candidates_per_object.size());
  r.k_used.resize(candidates_per_object.size(), 0);
  for (std::size_t obj = 0; obj < candidates_per_object.size(); ++obj) {
    std::vector<std::size_t> order = candidates_per_object[obj];
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a].total != scores[b].total) return scores[a].total < scores[b].total;
      return a < b;
    });
    const std::size_t k = dynamic_k(sigma, order.size());
    r.k_used[obj] = k;
    for (std::size_t i = 0; i < k; ++i) {
      r.positives[obj].push_back(order[i]);
      r.owner[order[i]] = static_cast<int>(obj);
    }
  }
  return r;
}

// One pyramid level of feature-bin centers.
struct BinGrid {
  double stride = 8.0;
  std::size_t nx = 0;
  std::size_t ny = 0;
  Point2 origin{};  // center of bin (0,0)

  Point2 bin_center(std::size_t ix, std::size_t iy) const {
    return {origin.x + static_cast<double>(ix) * stride,
            origin.y + static_cast<double>(iy) * stride};
  }
  std::size_t bin_index(std::size_t ix, std::size_t iy) const { return iy * nx + ix; }
};

struct CenterAssignment {
  // labels[level][bin] = object index or -1.
  std::vector<std::vector<int>> labels;
  // Per object: (level, bin index) of its positive bin.
  std::vector<std::pair<std::size_t, std::size_t>> positive_bin;
};

// FPN-style scale-to-level mapping: level = floor(log2(sqrt(area)/8)),
// clamped to the available levels.
inline std::size_t scale_to_level(double area, std::size_t n_levels) {
  const double s = std::sqrt(std::max(area, 1e-12));
  const auto lvl = static_cast<long>(std::floor(std::log2(s / 8.0)));
  return static_cast<std::size_t>(std::clamp<long>(lvl, 0, static_cast<long>(n_levels) - 1));
}

// Each GT is assigned to the level matching its scale; within that level the
// bin whose center is nearest the GT geometric center is positive. Ties by
// lowest bin index.
inline CenterAssignment center_init_assign(const std::vector<BinGrid>& grids,
                                           const std::vector<QuadBox>& gt_objects) {
  CenterAssignment out;
  out.labels.resize(grids.size());
  for (std::size_t l = 0; l < grids.size(); ++l) {
    out.labels[l].assign(grids[l].nx * grids[l].ny, -1);
  }
  for (std::size_t obj = 0; obj < gt_objects.size(); ++obj) {
    const Point2 c = quad_center(gt_objects[obj]);
    const std::size_t lvl = scale_to_level(polygon_area(gt_objects[obj]), grids.size());
    const BinGrid& g = grids[lvl];
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t iy = 0; iy < g.ny; ++iy) {
      for (std::size_t ix = 0; ix < g.nx; ++ix) {
        const double d = dist(g.bin_center(ix, iy), c);
        if (d < best_d - kGeomTol) {
          best_d = d;
          best = g.bin_index(ix, iy);
        }
      }
    }
    out.labels[lvl][best] = static_cast<int>(obj);
    out.positive_bin.emplace_back(lvl, best);
  }
  return out;
}

// Max-IoU baseline: each candidate goes positive for the GT maximizing the
// rotated IoU of its convex hull, if that IoU clears the threshold.
inline AssignmentResult max_iou_assign(const std::vector<Candidate>& candidates,
                                       const std::vector<QuadBox>& gts, double threshold = 0.5) {
  if (threshold <= 0.0 || threshold >= 1.0) throw InvalidArgument("threshold must be in (0,1)");
  AssignmentResult r;
  r.sigma = 0.0;
  r.owner.assign(candidates.size(), -1);
  r.positives.resize(gts.size());
  r.k_used.assign(gts.size(), 0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const ConvexPolygon hull = convex_hull(candidates[i].point_set);
    double best_iou = 0.0;
    int best_obj = -1;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const double iou = polygon_iou(hull, to_polygon(gts[j]));
      if (iou > best_iou) {
        best_iou = iou;
        best_obj = static_cast<int>(j);
      }
    }
    if (best_obj >= 0 && best_iou >= threshold) {
      r.owner[i] = best_obj;
      r.positives[static_cast<std::size_t>(best_obj)].push_back(i);
    }
  }
  for (std::size_t j = 0; j < gts.size(); ++j) r.k_used[j] = r.positives[j].size();
  return r;
}

}  // namespace orp
