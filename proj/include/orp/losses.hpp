#pragma once

// Training losses with analytic gradients with respect to point coordinates:
// focal classification loss, polygon GIoU losses under the ConvexHull and
// NearestGTCorner conversions, the spatial constraint, the weighted total,
// and a central-finite-difference gradient checker.
//
// Differentiation convention: combinatorial structure (hull membership,
// corner selection, inside/outside status, clip topology) is frozen during a
// gradient evaluation; gradients are subgradients valid on each smooth piece.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "orp/geometry.hpp"

namespace orp {

struct LossWeights {
  double lambda1 = 0.3;  // init-stage weight
  double lambda2 = 1.0;  // refine-stage weight
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
};

struct LossBreakdown {
  double cls = 0.0;
  double loc_init = 0.0;
  double loc_refine = 0.0;
  double sc_init = 0.0;
  double sc_refine = 0.0;
  double total = 0.0;
  bool empty_positives = false;
};

// Per-point d(loss)/d(x,y), aligned with a PointSet.
using PointGrad = std::vector<Point2>;

struct FocalResult {
  double loss = 0.0;
  double dloss_dlogit = 0.0;
};

// Standard focal loss on a predicted probability, with the gradient taken
// with respect to the pre-sigmoid logit.
inline FocalResult focal_loss(double p, int y, double alpha = 0.25, double gamma = 2.0) {
  if (p < 0.0 || p > 1.0) throw InvalidArgument("focal_loss probability outside [0,1]");
  const double eps = 1e-12;
  p = std::min(std::max(p, eps), 1.0 - eps);
  FocalResult r;
  if (y) {
    const double w = std::pow(1.0 - p, gamma);
    r.loss = -alpha * w * std::log(p);
    // dL/dp, then chain through dp/dlogit = p(1-p)
    const double dldp = -alpha * (-gamma * std::pow(1.0 - p, gamma - 1.0) * std::log(p) + w / p);
    r.dloss_dlogit = dldp * p * (1.0 - p);
  } else {
    const double w = std::pow(p, gamma);
    r.loss = -(1.0 - alpha) * w * std::log(1.0 - p);
    const double dldp =
        -(1.0 - alpha) * (gamma * std::pow(p, gamma - 1.0) * std::log(1.0 - p) - w / (1.0 - p));
    r.dloss_dlogit = dldp * p * (1.0 - p);
  }
  return r;
}

namespace detail {

// d(area)/d(vertex k) of a CCW polygon by the shoelace formula.
inline Point2 shoelace_grad(const std::vector<Point2>& v, std::size_t k) {
  const std::size_t n = v.size();
  const Point2& prev = v[(k + n - 1) % n];
  const Point2& next = v[(k + 1) % n];
  return {0.5 * (next.y - prev.y), 0.5 * (prev.x - next.x)};
}

// Jacobians of the intersection point of segment (a1,a2) with the fixed
// line through (b1,b2), with respect to a1 and a2. Row-major 2x2.
struct SegJacobian {
  std::array<double, 4> d_a1{};
  std::array<double, 4> d_a2{};
};

inline SegJacobian line_intersect_jacobian(const Point2& a1, const Point2& a2, const Point2& b1,
                                           const Point2& b2) {
  const Point2 d = a2 - a1;
  const Point2 e = b2 - b1;
  const Point2 f = b1 - a1;
  const double num = cross(f, e);
  const double den = cross(d, e);
  const double t = num / den;
  // dnum/da1 = (-e.y, e.x); dden/da1 = (-e.y, e.x); dden/da2 = (e.y, -e.x)
  const double dt_a1x = (-e.y * den - num * -e.y) / (den * den);
  const double dt_a1y = (e.x * den - num * e.x) / (den * den);
  const double dt_a2x = (-num * e.y) / (den * den);
  const double dt_a2y = (num * e.x) / (den * den);
  SegJacobian j;
  // P = a1 + t*d, d = a2 - a1
  j.d_a1 = {(1.0 - t) + d.x * dt_a1x, d.x * dt_a1y, d.y * dt_a1x, (1.0 - t) + d.y * dt_a1y};
  j.d_a2 = {t + d.x * dt_a2x, d.x * dt_a2y, d.y * dt_a2x, t + d.y * dt_a2y};
  return j;
}

inline Point2 apply_jt(const std::array<double, 4>& j, const Point2& g) {
  // Accumulate J^T * g
  return {j[0] * g.x + j[2] * g.y, j[1] * g.x + j[3] * g.y};
}

struct GiouWithGrad {
  double giou = 0.0;
  std::vector<Point2> grad;  // d(giou)/d(a vertex), aligned with poly_a
};

// GIoU of CCW polygon `a` (differentiable) against fixed quad `gt`, with
// the analytic gradient with respect to every vertex of `a`. Intersection
// vertices are classified by provenance (a-vertex, gt-vertex, or edge-edge
// crossing) and differentiated through the two-line intersection formula.
inline GiouWithGrad giou_with_grad(const std::vector<Point2>& a, const QuadBox& gt) {
  const std::size_t na = a.size();
  GiouWithGrad out;
  out.grad.assign(na, Point2{});

  std::vector<Point2> gtv(gt.begin(), gt.end());
  const double area_a = polygon_area(a);
  const double area_b = polygon_area(gtv);
  if (area_a <= kGeomTol || area_b <= kGeomTol) {
    throw InvalidGeometry("giou_with_grad requires positive areas");
  }

  double scale = 1.0;
  for (const Point2& p : a) scale = std::max({scale, std::abs(p.x), std::abs(p.y)});
  const double match_tol = 1e-7 * scale;

  // Intersection polygon and its area gradient, scattered back to `a`.
  const auto inter = convex_intersect(ConvexPolygon{a}, ConvexPolygon{gtv});
  double area_i = 0.0;
  std::vector<Point2> grad_i(na, Point2{});
  if (inter) {
    const auto& iv = inter->vertices;
    area_i = polygon_area(iv);
    for (std::size_t k = 0; k < iv.size(); ++k) {
      const Point2 g = shoelace_grad(iv, k);
      // Classify vertex provenance.
      bool handled = false;
      for (std::size_t i = 0; i < na && !handled; ++i) {
        if (dist(iv[k], a[i]) <= match_tol) {
          grad_i[i] += g;
          handled = true;
        }
      }
      for (std::size_t j = 0; j < 4 && !handled; ++j) {
        if (dist(iv[k], gtv[j]) <= match_tol) handled = true;  // fixed, zero grad
      }
      if (handled) continue;
      // Edge-edge crossing: find the a-edge and gt-edge through this vertex.
      auto on_segment = [&](const Point2& p, const Point2& s1, const Point2& s2) {
        const Point2 d = s2 - s1;
        const double len2 = dot(d, d);
        if (len2 <= kGeomTol) return false;
        const double t = dot(p - s1, d) / len2;
        if (t < -1e-9 || t > 1.0 + 1e-9) return false;
        return dist(p, s1 + d * t) <= match_tol;
      };
      for (std::size_t i = 0; i < na && !handled; ++i) {
        const Point2& a1 = a[i];
        const Point2& a2 = a[(i + 1) % na];
        if (!on_segment(iv[k], a1, a2)) continue;
        for (std::size_t j = 0; j < 4; ++j) {
          const Point2& b1 = gtv[j];
          const Point2& b2 = gtv[(j + 1) % 4];
          if (!on_segment(iv[k], b1, b2)) continue;
          const SegJacobian jac = line_intersect_jacobian(a1, a2, b1, b2);
          grad_i[i] += apply_jt(jac.d_a1, g);
          grad_i[(i + 1) % na] += apply_jt(jac.d_a2, g);
          handled = true;
          break;
        }
      }
      // Unclassified vertices (deep-degenerate contact) get zero subgradient.
    }
  }

  // Enclosing hull of both vertex sets; gradient flows to a-vertices only.
  std::vector<Point2> all = a;
  all.insert(all.end(), gtv.begin(), gtv.end());
  const auto hull_idx = convex_hull_indices(all);
  std::vector<Point2> hull;
  hull.reserve(hull_idx.size());
  for (std::size_t i : hull_idx) hull.push_back(all[i]);
  const double area_c = polygon_area(hull);
  std::vector<Point2> grad_c(na, Point2{});
  for (std::size_t k = 0; k < hull.size(); ++k) {
    if (hull_idx[k] < na) grad_c[hull_idx[k]] += shoelace_grad(hull, k);
  }

  std::vector<Point2> grad_a(na, Point2{});
  for (std::size_t k = 0; k < na; ++k) grad_a[k] = shoelace_grad(a, k);

  const double u = area_a + area_b - area_i;
  // giou = I/U - (C - U)/C = I/U - 1 + U/C
  out.giou = area_i / u - (area_c - u) / area_c;
  for (std::size_t k = 0; k < na; ++k) {
    const Point2 du = grad_a[k] - grad_i[k] * 1.0;
    const Point2 d_iou{(grad_i[k].x * u - area_i * du.x) / (u * u),
                       (grad_i[k].y * u - area_i * du.y) / (u * u)};
    const Point2 d_pen{(du.x * area_c - u * grad_c[k].x) / (area_c * area_c),
                       (du.y * area_c - u * grad_c[k].y) / (area_c * area_c)};
    out.grad[k] = d_iou + d_pen;
  }
  return out;
}

}  // namespace detail

struct LossWithGrad {
  double loss = 0.0;
  PointGrad grad;
};

// loss = 1 - GIoU(ConvexHull(points), gt). Interior (non-hull) points
// receive exactly zero subgradient.
inline LossWithGrad giou_loss_convexhull(const PointSet& points, const QuadBox& gt) {
  const auto hull_idx = convex_hull_indices(points);
  std::vector<Point2> hull;
  hull.reserve(hull_idx.size());
  for (std::size_t i : hull_idx) hull.push_back(points[i]);
  const auto g = detail::giou_with_grad(hull, gt);
  LossWithGrad out;
  out.loss = 1.0 - g.giou;
  out.grad.assign(points.size(), Point2{});
  for (std::size_t k = 0; k < hull_idx.size(); ++k) {
    out.grad[hull_idx[k]] = Point2{-g.grad[k].x, -g.grad[k].y};
  }
  return out;
}

// loss = 1 - GIoU(NearestGTCorner(points, gt), gt). Only the 4 selected
// points receive gradient; the selection is held fixed during
// differentiation.
inline LossWithGrad giou_loss_nearestcorner(const PointSet& points, const QuadBox& gt) {
  std::array<std::size_t, 4> sel{};
  const QuadBox quad = nearest_gt_corner(points, gt, &sel);
  const std::vector<Point2> qv(quad.begin(), quad.end());
  const auto g = detail::giou_with_grad(qv, gt);
  LossWithGrad out;
  out.loss = 1.0 - g.giou;
  out.grad.assign(points.size(), Point2{});
  for (std::size_t k = 0; k < 4; ++k) {
    out.grad[sel[k]] += Point2{-g.grad[k].x, -g.grad[k].y};
  }
  return out;
}

// Spatial constraint: mean distance-to-GT-center penalty over points lying
// outside the GT box, averaged over assigned point sets. Exactly zero when
// every point is inside or on the boundary.
inline std::pair<double, std::vector<PointGrad>> spatial_constraint_loss(
    const std::vector<PointSet>& point_sets, const QuadBox& gt) {
  const std::size_t n_a = point_sets.size();
  if (n_a == 0) throw InvalidArgument("spatial_constraint_loss needs >= 1 point set");
  const Point2 center = quad_center(gt);
  double loss = 0.0;
  std::vector<PointGrad> grads(n_a);
  for (std::size_t s = 0; s < n_a; ++s) {
    const PointSet& ps = point_sets[s];
    grads[s].assign(ps.size(), Point2{});
    std::vector<std::size_t> outside;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (!point_in_quad(ps[i], gt)) outside.push_back(i);
    }
    if (outside.empty()) continue;
    const double inv = 1.0 / (static_cast<double>(n_a) * static_cast<double>(outside.size()));
    for (std::size_t i : outside) {
      const Point2 d = ps[i] - center;
      const double r = norm(d);
      loss += inv * r;
      if (r > kGeomTol) grads[s][i] = Point2{d.x / r * inv, d.y / r * inv};
    }
  }
  return {loss, std::move(grads)};
}

struct StageTerms {
  double loc = 0.0;
  double spatial = 0.0;
  bool has_positives = true;
};

// Overall loss: L = L_cls + lambda1 * (L_loc + L_sc)_init + lambda2 * (...)_refine.
// Classification is averaged over all candidates; localization over positives
// only (per-stage positive counts).
inline LossBreakdown total_loss(double cls, const StageTerms& init_stage,
                                const StageTerms& refine_stage, const LossWeights& w) {
  LossBreakdown b;
  b.cls = cls;
  b.loc_init = init_stage.has_positives ? init_stage.loc : 0.0;
  b.sc_init = init_stage.has_positives ? init_stage.spatial : 0.0;
  b.loc_refine = refine_stage.has_positives ? refine_stage.loc : 0.0;
  b.sc_refine = refine_stage.has_positives ? refine_stage.spatial : 0.0;
  b.empty_positives = !init_stage.has_positives || !refine_stage.has_positives;
  b.total = b.cls + w.lambda1 * (b.loc_init + b.sc_init) + w.lambda2 * (b.loc_refine + b.sc_refine);
  return b;
}

// Central finite differences per coordinate against the analytic gradient.
// Returns the max relative error (denominators floored at 1e-12).
inline double grad_check(const std::function<LossWithGrad(const PointSet&)>& loss_op,
                         const PointSet& points, double h = 1e-6) {
  const auto base = loss_op(points);
  double max_rel = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int c = 0; c < 2; ++c) {
      PointSet plus = points, minus = points;
      double& pp = c == 0 ? plus[i].x : plus[i].y;
      double& pm = c == 0 ? minus[i].x : minus[i].y;
      pp += h;
      pm -= h;
      const double fd = (loss_op(plus).loss - loss_op(minus).loss) / (2.0 * h);
      const double an = c == 0 ? base.grad[i].x : base.grad[i].y;
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-12});
      const double rel = std::abs(fd - an) / denom;
      // Treat agreement at absolute noise level as exact.
      if (std::abs(fd - an) > 1e-9) max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace orp
