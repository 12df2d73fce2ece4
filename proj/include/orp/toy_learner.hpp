#pragma once

// Backbone-free, desk-scale realization of the two-stage pipeline:
// synthetic oriented scenes, a procedural feature field standing in for the
// CNN, candidates spawned around center bins, and gradient-descent
// refinement of the point sets under the combined loss with APAA selecting
// refine-stage positives. Single-threaded and bit-reproducible per seed.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "orp/apaa.hpp"
#include "orp/eval.hpp"
#include "orp/geometry.hpp"
#include "orp/losses.hpp"

namespace orp {

// Uniform double in [0,1) from the raw engine output; avoids the
// implementation-defined std distributions for cross-run stability.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

struct SceneObject {
  int class_id = 0;
  QuadBox box{};
  bool difficult = false;
};

struct SyntheticScene {
  double extent = 128.0;
  std::vector<SceneObject> objects;
  std::uint64_t seed = 0;
};

enum class AssignerKind { kApaa, kMaxIou };

struct ToyConfig {
  double extent = 128.0;
  std::size_t n_objects = 1;
  std::size_t n_classes = 3;
  double min_long_side = 24.0;
  double max_long_side = 56.0;
  double min_aspect = 1.0;
  double max_aspect = 8.0;

  double field_stride = 8.0;
  std::size_t feature_dim = kDefaultFeatureDim;
  double noise = 0.05;

  double learn_rate = 40.0;
  std::size_t steps = 300;
  double sigma = 0.4;
  std::size_t n_candidates_per_object = 16;
  bool spatial_constraint = true;
  AssignerKind assigner = AssignerKind::kApaa;
  LossWeights loss_weights{};
  QualityWeights quality_weights{};
  double max_iou_threshold = 0.5;

  std::uint64_t seed = 1;
  std::size_t scenes = 20;
};

inline QuadBox make_oriented_box(const Point2& center, double w, double h, double angle_deg) {
  RotatedRect r;
  r.center = center;
  r.width = w;
  r.height = h;
  r.angle_deg = angle_deg;
  return r.corners();
}

// Oriented boxes with aspect ratios in [min_aspect, max_aspect] and angles
// uniform in [-90, 90), fully inside the extent. Reproducible per seed.
inline SyntheticScene gen_scene(std::uint64_t seed, const ToyConfig& cfg = {}) {
  if (cfg.extent <= 0.0) throw InvalidArgument("extent must be positive");
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL);
  SyntheticScene scene;
  scene.extent = cfg.extent;
  scene.seed = seed;
  for (std::size_t i = 0; i < cfg.n_objects; ++i) {
    const double long_side = uniform_in(rng, cfg.min_long_side, cfg.max_long_side);
    const double aspect = uniform_in(rng, cfg.min_aspect, cfg.max_aspect);
    const double w = long_side;
    const double h = long_side / aspect;
    const double angle = uniform_in(rng, -90.0, 90.0);
    const double margin = 0.5 * std::hypot(w, h) + 1.0;
    const Point2 c{uniform_in(rng, margin, cfg.extent - margin),
                   uniform_in(rng, margin, cfg.extent - margin)};
    SceneObject obj;
    obj.class_id = static_cast<int>(rng() % cfg.n_classes);
    obj.box = make_oriented_box(c, w, h, angle);
    scene.objects.push_back(obj);
  }
  return scene;
}

// Procedural stand-in for backbone features: per-class prototype vector
// blended inside each GT with distance falloff, plus seeded noise and a
// constant bias channel so no sampled vector has zero norm.
struct FeatureField {
  BinGrid grid;
  std::size_t dim = kDefaultFeatureDim;
  std::vector<std::vector<double>> values;  // grid.nx * grid.ny vectors

  const std::vector<double>& at(std::size_t ix, std::size_t iy) const {
    return values[grid.bin_index(ix, iy)];
  }

  std::vector<double> sample_bilinear(const Point2& p) const {
    const double fx = (p.x - grid.origin.x) / grid.stride;
    const double fy = (p.y - grid.origin.y) / grid.stride;
    const double cx = std::clamp(fx, 0.0, static_cast<double>(grid.nx - 1));
    const double cy = std::clamp(fy, 0.0, static_cast<double>(grid.ny - 1));
    const auto x0 = static_cast<std::size_t>(std::min(cx, static_cast<double>(grid.nx - 2)));
    const auto y0 = static_cast<std::size_t>(std::min(cy, static_cast<double>(grid.ny - 2)));
    const double tx = cx - static_cast<double>(x0);
    const double ty = cy - static_cast<double>(y0);
    std::vector<double> out(dim, 0.0);
    const auto& v00 = at(x0, y0);
    const auto& v10 = at(x0 + 1, y0);
    const auto& v01 = at(x0, y0 + 1);
    const auto& v11 = at(x0 + 1, y0 + 1);
    for (std::size_t d = 0; d < dim; ++d) {
      out[d] = (1 - tx) * (1 - ty) * v00[d] + tx * (1 - ty) * v10[d] + (1 - tx) * ty * v01[d] +
               tx * ty * v11[d];
    }
    return out;
  }
};

inline std::vector<double> class_prototype(int class_id, std::size_t dim) {
  std::mt19937_64 rng(0xC1A55ULL * 31 + static_cast<std::uint64_t>(class_id) * 0x100000001B3ULL);
  std::vector<double> v(dim);
  double n2 = 0.0;
  for (double& x : v) {
    x = uniform_in(rng, -1.0, 1.0);
    n2 += x * x;
  }
  const double n = std::sqrt(std::max(n2, 1e-12));
  for (double& x : v) x /= n;
  return v;
}

inline FeatureField gen_feature_field(const SyntheticScene& scene, const ToyConfig& cfg) {
  FeatureField f;
  f.dim = cfg.feature_dim;
  f.grid.stride = cfg.field_stride;
  f.grid.origin = {cfg.field_stride * 0.5, cfg.field_stride * 0.5};
  f.grid.nx = static_cast<std::size_t>(std::ceil(scene.extent / cfg.field_stride));
  f.grid.ny = f.grid.nx;
  std::mt19937_64 rng(scene.seed ^ 0xFEA7F1E1DULL);
  f.values.assign(f.grid.nx * f.grid.ny, std::vector<double>(f.dim, 0.0));
  for (std::size_t iy = 0; iy < f.grid.ny; ++iy) {
    for (std::size_t ix = 0; ix < f.grid.nx; ++ix) {
      auto& v = f.values[f.grid.bin_index(ix, iy)];
      v[0] = 0.2;  // bias channel
      const Point2 p = f.grid.bin_center(ix, iy);
      for (const SceneObject& obj : scene.objects) {
        if (!point_in_quad(p, obj.box)) continue;
        const Point2 c = quad_center(obj.box);
        const double radius = 0.5 * std::sqrt(polygon_area(obj.box));
        const double falloff = std::exp(-dist(p, c) / std::max(radius, 1.0));
        const auto proto = class_prototype(obj.class_id, f.dim);
        for (std::size_t d = 0; d < f.dim; ++d) v[d] += falloff * proto[d];
      }
      for (std::size_t d = 0; d < f.dim; ++d) {
        v[d] += cfg.noise * uniform_in(rng, -1.0, 1.0);
      }
    }
  }
  return f;
}

struct TrainState {
  SyntheticScene scene;
  FeatureField field;
  std::vector<Candidate> candidates;            // current (init + offsets applied)
  std::vector<PointSet> init_points;            // per candidate
  std::vector<PointSet> offsets;                // learnable, per candidate
  std::vector<std::vector<std::size_t>> candidates_per_object;
  std::vector<std::size_t> candidate_object;    // init-stage owner per candidate
  std::vector<LossBreakdown> history;
  double lr = 0.0;
  double init_loc = 0.0;   // init-stage terms, constant during refinement
  double init_sc = 0.0;
  std::size_t degenerate_skips = 0;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Spawn candidates: for each object, the n nearest bins to the GT center at
// its pyramid level each emit a candidate whose 9 points start on a 3x3
// lattice around the bin center (all within one stride). Classification is
// a frozen linear readout of the field at the bin; features are sampled
// bilinearly at the point locations.
inline TrainState init_stage(const SyntheticScene& scene, const FeatureField& field,
                             const ToyConfig& cfg) {
  TrainState st;
  st.scene = scene;
  st.field = field;
  st.lr = cfg.learn_rate;

  std::vector<QuadBox> gts;
  for (const SceneObject& o : scene.objects) gts.push_back(o.box);
  const std::vector<BinGrid> grids{field.grid};
  const CenterAssignment ca = center_init_assign(grids, gts);

  for (std::size_t obj = 0; obj < scene.objects.size(); ++obj) {
    const Point2 gc = quad_center(gts[obj]);
    // n nearest bins to the GT center, ties by bin index.
    std::vector<std::size_t> bins(field.grid.nx * field.grid.ny);
    for (std::size_t i = 0; i < bins.size(); ++i) bins[i] = i;
    std::stable_sort(bins.begin(), bins.end(), [&](std::size_t a, std::size_t b) {
      const Point2 pa = field.grid.bin_center(a % field.grid.nx, a / field.grid.nx);
      const Point2 pb = field.grid.bin_center(b % field.grid.nx, b / field.grid.nx);
      const double da = dist(pa, gc), db = dist(pb, gc);
      if (da != db) return da < db;
      return a < b;
    });
    const std::size_t n_cand = std::min(cfg.n_candidates_per_object, bins.size());
    std::vector<std::size_t> group;
    for (std::size_t c = 0; c < n_cand; ++c) {
      const std::size_t bin = bins[c];
      const Point2 bc = field.grid.bin_center(bin % field.grid.nx, bin / field.grid.nx);
      Candidate cand;
      cand.source_bin = bin;
      const double sp = field.grid.stride / 4.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          cand.point_set.push_back({bc.x + dx * sp, bc.y + dy * sp});
        }
      }
      const auto& fv = field.at(bin % field.grid.nx, bin / field.grid.nx);
      for (std::size_t cls = 0; cls < cfg.n_classes; ++cls) {
        const auto w = class_prototype(static_cast<int>(cls), field.dim);
        double z = 0.0;
        for (std::size_t d = 0; d < field.dim; ++d) z += w[d] * fv[d];
        cand.cls_prob.push_back(sigmoid(4.0 * z));
      }
      for (const Point2& p : cand.point_set) cand.features.push_back(field.sample_bilinear(p));
      group.push_back(st.candidates.size());
      st.candidate_object.push_back(obj);
      st.init_points.push_back(cand.point_set);
      st.offsets.push_back(PointSet(cand.point_set.size(), Point2{}));
      st.candidates.push_back(std::move(cand));
    }
    st.candidates_per_object.push_back(std::move(group));
  }

  // Init-stage loss terms: the center-assigned positive candidate of each
  // object, evaluated at its initial points. Constant during refinement.
  double loc = 0.0, sc = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t obj = 0; obj < scene.objects.size(); ++obj) {
    const std::size_t bin = ca.positive_bin[obj].second;
    for (std::size_t ci : st.candidates_per_object[obj]) {
      if (st.candidates[ci].source_bin != bin) continue;
      try {
        loc += giou_loss_convexhull(st.init_points[ci], gts[obj]).loss;
        sc += spatial_constraint_loss({st.init_points[ci]}, gts[obj]).first;
        ++n_pos;
      } catch (const DegenerateInput&) {
        ++st.degenerate_skips;
      }
      break;
    }
  }
  if (n_pos > 0) {
    st.init_loc = loc / static_cast<double>(n_pos);
    st.init_sc = sc / static_cast<double>(n_pos);
  }
  return st;
}

namespace detail {

struct ToyEval {
  LossBreakdown breakdown;
  std::vector<PointGrad> grads;  // per candidate, d(total)/d(offset)
};

inline ToyEval evaluate_refine(TrainState& st, const ToyConfig& cfg) {
  std::vector<QuadBox> gts;
  for (const SceneObject& o : st.scene.objects) gts.push_back(o.box);

  // Current point positions.
  for (std::size_t ci = 0; ci < st.candidates.size(); ++ci) {
    PointSet& ps = st.candidates[ci].point_set;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      ps[k] = st.init_points[ci][k] + st.offsets[ci][k];
    }
  }

  // Assignment at the refine stage.
  AssignmentResult assign;
  if (cfg.assigner == AssignerKind::kApaa) {
    std::vector<QualityScore> scores(st.candidates.size());
    for (std::size_t ci = 0; ci < st.candidates.size(); ++ci) {
      const std::size_t obj = st.candidate_object[ci];
      try {
        scores[ci] = quality_total(st.candidates[ci], gts[obj],
                                   static_cast<std::size_t>(st.scene.objects[obj].class_id),
                                   cfg.quality_weights, cfg.loss_weights.focal_alpha,
                                   cfg.loss_weights.focal_gamma);
      } catch (const std::runtime_error&) {
        scores[ci].total = 1e9;  // degenerate candidate sorts last
        ++st.degenerate_skips;
      }
    }
    assign = dynamic_topk_assign(st.candidates_per_object, scores, st.candidates.size(), cfg.sigma);
  } else {
    std::vector<Candidate> cands = st.candidates;
    assign = max_iou_assign(cands, gts, cfg.max_iou_threshold);
  }

  ToyEval ev;
  ev.grads.assign(st.candidates.size(), PointGrad{});
  for (std::size_t ci = 0; ci < st.candidates.size(); ++ci) {
    ev.grads[ci].assign(st.candidates[ci].point_set.size(), Point2{});
  }

  // Classification loss over all candidates (frozen readout: no gradient).
  double cls = 0.0;
  for (std::size_t ci = 0; ci < st.candidates.size(); ++ci) {
    const Candidate& c = st.candidates[ci];
    const int owner = assign.owner[ci];
    for (std::size_t k = 0; k < c.cls_prob.size(); ++k) {
      const bool is_gt =
          owner >= 0 &&
          static_cast<int>(k) == st.scene.objects[static_cast<std::size_t>(owner)].class_id;
      cls += focal_loss(c.cls_prob[k], is_gt ? 1 : 0, cfg.loss_weights.focal_alpha,
                        cfg.loss_weights.focal_gamma)
                 .loss;
    }
  }
  cls /= static_cast<double>(std::max<std::size_t>(st.candidates.size(), 1));

  // Refine localization: ConvexHull GIoU over positives, averaged by N_loc.
  std::size_t n_loc = 0;
  for (const auto& pos : assign.positives) n_loc += pos.size();
  double loc = 0.0;
  double sc = 0.0;
  std::size_t sc_objects = 0;
  if (n_loc > 0) {
    for (std::size_t obj = 0; obj < gts.size(); ++obj) {
      const auto& pos = assign.positives[obj];
      if (pos.empty()) continue;
      for (std::size_t ci : pos) {
        try {
          const auto lg = giou_loss_convexhull(st.candidates[ci].point_set, gts[obj]);
          loc += lg.loss;
          const double s = cfg.loss_weights.lambda2 / static_cast<double>(n_loc);
          for (std::size_t k = 0; k < lg.grad.size(); ++k) {
            ev.grads[ci][k] += lg.grad[k] * s;
          }
        } catch (const DegenerateInput&) {
          ++st.degenerate_skips;
        }
      }
      if (cfg.spatial_constraint) {
        std::vector<PointSet> sets;
        for (std::size_t ci : pos) sets.push_back(st.candidates[ci].point_set);
        auto [sl, sg] = spatial_constraint_loss(sets, gts[obj]);
        sc += sl;
        ++sc_objects;
        for (std::size_t s_i = 0; s_i < pos.size(); ++s_i) {
          for (std::size_t k = 0; k < sg[s_i].size(); ++k) {
            ev.grads[pos[s_i]][k] += sg[s_i][k] * cfg.loss_weights.lambda2;
          }
        }
      }
    }
    loc /= static_cast<double>(n_loc);
    if (sc_objects > 0) sc /= static_cast<double>(sc_objects);
  }

  StageTerms init_terms{st.init_loc, st.init_sc, true};
  StageTerms refine_terms{loc, sc, n_loc > 0};
  ev.breakdown = total_loss(cls, init_terms, refine_terms, cfg.loss_weights);
  return ev;
}

}  // namespace detail

// One gradient-descent update on the point offsets. A step that would
// increase the total loss is reverted and the learning rate halved
// (halve-on-plateau), so the recorded history is non-increasing.
inline void refine_step(TrainState& st, const ToyConfig& cfg) {
  const detail::ToyEval before = detail::evaluate_refine(st, cfg);
  if (st.lr <= 0.0) {
    st.history.push_back(before.breakdown);
    return;
  }
  const std::vector<PointSet> saved = st.offsets;
  for (std::size_t ci = 0; ci < st.offsets.size(); ++ci) {
    for (std::size_t k = 0; k < st.offsets[ci].size(); ++k) {
      st.offsets[ci][k].x -= st.lr * before.grads[ci][k].x;
      st.offsets[ci][k].y -= st.lr * before.grads[ci][k].y;
    }
  }
  const detail::ToyEval after = detail::evaluate_refine(st, cfg);
  if (after.breakdown.total <= before.breakdown.total + 1e-12) {
    st.history.push_back(after.breakdown);
  } else {
    st.offsets = saved;
    st.lr *= 0.5;
    st.history.push_back(before.breakdown);
  }
}

struct SceneResult {
  double mean_iou = 0.0;               // per-object best rotated IoU, averaged
  double mean_orientation_error = 0.0; // degrees
  double outside_points = 0.0;         // final outside-point count, mean per positive set
  std::vector<LossBreakdown> history;
};

struct ToyReport {
  std::vector<SceneResult> scenes;
  double mean_iou = 0.0;
  double mean_orientation_error = 0.0;
  double mean_outside_points = 0.0;
};

inline SceneResult finish_metrics(TrainState& st, const ToyConfig& cfg) {
  SceneResult res;
  res.history = st.history;

  std::vector<QuadBox> gts;
  for (const SceneObject& o : st.scene.objects) gts.push_back(o.box);

  // Re-run assignment to pick each object's positives at the final state.
  const detail::ToyEval fin = detail::evaluate_refine(st, cfg);
  (void)fin;
  AssignmentResult assign;
  {
    std::vector<QualityScore> scores(st.candidates.size());
    for (std::size_t ci = 0; ci < st.candidates.size(); ++ci) {
      const std::size_t obj = st.candidate_object[ci];
      try {
        scores[ci] = quality_total(st.candidates[ci], gts[obj],
                                   static_cast<std::size_t>(st.scene.objects[obj].class_id),
                                   cfg.quality_weights);
      } catch (const std::runtime_error&) {
        scores[ci].total = 1e9;
      }
    }
    assign = dynamic_topk_assign(st.candidates_per_object, scores, st.candidates.size(),
                                 cfg.sigma > 0.0 ? cfg.sigma : 0.4);
  }

  double iou_sum = 0.0, ang_sum = 0.0, outside_sum = 0.0;
  std::size_t n_sets = 0;
  for (std::size_t obj = 0; obj < gts.size(); ++obj) {
    const RotatedRect gt_rect = min_area_rect(PointSet(gts[obj].begin(), gts[obj].end()));
    const double gt_aspect = gt_rect.height > kGeomTol ? gt_rect.width / gt_rect.height : 1e9;
    double best_iou = 0.0, best_ang = 90.0;
    for (std::size_t ci : assign.positives[obj]) {
      try {
        // MinAeraRect post-processing of the learned points.
        const RotatedRect pr = min_area_rect(st.candidates[ci].point_set);
        const double iou = quad_iou(pr.corners(), gts[obj]);
        if (iou > best_iou) {
          best_iou = iou;
          best_ang = orientation_error_deg(pr.angle_deg, gt_rect.angle_deg, gt_aspect);
        }
      } catch (const std::runtime_error&) {
        ++st.degenerate_skips;
      }
      std::size_t outside = 0;
      for (const Point2& p : st.candidates[ci].point_set) {
        if (!point_in_quad(p, gts[obj])) ++outside;
      }
      outside_sum += static_cast<double>(outside);
      ++n_sets;
    }
    iou_sum += best_iou;
    ang_sum += best_ang;
  }
  const double n_obj = static_cast<double>(std::max<std::size_t>(gts.size(), 1));
  res.mean_iou = iou_sum / n_obj;
  res.mean_orientation_error = ang_sum / n_obj;
  res.outside_points = n_sets > 0 ? outside_sum / static_cast<double>(n_sets) : 0.0;
  return res;
}

inline SceneResult train_scene(const SyntheticScene& scene, const ToyConfig& cfg,
                               TrainState* out_state = nullptr) {
  const FeatureField field = gen_feature_field(scene, cfg);
  TrainState st = init_stage(scene, field, cfg);
  for (std::size_t s = 0; s < cfg.steps; ++s) refine_step(st, cfg);
  SceneResult res = finish_metrics(st, cfg);
  if (out_state) *out_state = std::move(st);
  return res;
}

inline ToyReport train(const ToyConfig& cfg) {
  ToyReport rep;
  double iou = 0.0, ang = 0.0, outside = 0.0;
  for (std::size_t s = 0; s < cfg.scenes; ++s) {
    const SyntheticScene scene = gen_scene(cfg.seed + s, cfg);
    SceneResult r = train_scene(scene, cfg);
    iou += r.mean_iou;
    ang += r.mean_orientation_error;
    outside += r.outside_points;
    rep.scenes.push_back(std::move(r));
  }
  const double n = static_cast<double>(std::max<std::size_t>(cfg.scenes, 1));
  rep.mean_iou = iou / n;
  rep.mean_orientation_error = ang / n;
  rep.mean_outside_points = outside / n;
  return rep;
}

}  // namespace orp
