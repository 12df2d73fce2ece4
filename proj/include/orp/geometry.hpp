#pragma once

// 2-D geometry kernels for oriented object detection: convex hulls,
// minimum-area rectangles, convex polygon clipping, IoU/GIoU, contour
// sampling and Chamfer distance. All operations are pure functions and
// all computation is double precision.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace orp {

// Global geometric tolerance, in scene units.
inline constexpr double kGeomTol = 1e-9;

struct DegenerateInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateOutput : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidGeometry : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2 operator+(const Point2& p) const { return {x + p.x, y + p.y}; }
  Point2 operator-(const Point2& p) const { return {x - p.x, y - p.y}; }
  Point2 operator*(double s) const { return {x * s, y * s}; }
  Point2& operator+=(const Point2& p) {
    x += p.x;
    y += p.y;
    return *this;
  }
};

inline double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Point2& a) { return std::hypot(a.x, a.y); }
inline double dist(const Point2& a, const Point2& b) { return norm(a - b); }

// Signed twice-area of triangle (o, a, b); > 0 when b is left of o->a.
inline double orient2d(const Point2& o, const Point2& a, const Point2& b) {
  return cross(a - o, b - o);
}

// Ordered set of adaptive points representing one candidate hypothesis.
using PointSet = std::vector<Point2>;

struct ConvexPolygon {
  std::vector<Point2> vertices;  // CCW order
};

// 4 corners in CCW order.
using QuadBox = std::array<Point2, 4>;

struct RotatedRect {
  Point2 center;
  double width = 0.0;   // >= height after canonicalization
  double height = 0.0;
  double angle_deg = 0.0;  // in [-90, 90), from +x axis to the width edge

  QuadBox corners() const {
    const double a = angle_deg * M_PI / 180.0;
    const Point2 u{std::cos(a), std::sin(a)};
    const Point2 v{-u.y, u.x};
    const Point2 hw = u * (0.5 * width);
    const Point2 hh = v * (0.5 * height);
    return {center - hw - hh, center + hw - hh, center + hw + hh, center - hw + hh};
  }
};

inline double polygon_area(const std::vector<Point2>& verts) {
  double twice = 0.0;
  const std::size_t n = verts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& p = verts[i];
    const Point2& q = verts[(i + 1) % n];
    twice += p.x * q.y - p.y * q.x;
  }
  return 0.5 * twice;
}

inline double polygon_area(const ConvexPolygon& poly) { return polygon_area(poly.vertices); }

inline double polygon_area(const QuadBox& box) {
  return polygon_area(std::vector<Point2>(box.begin(), box.end()));
}

// Jarvis march over an arbitrary point list. Returns indices into `pts` of
// the hull vertices in CCW order. Duplicate points are deduplicated before
// the march; among collinear candidates the farthest wins, so no hull edge
// contains an intermediate input point as a vertex.
inline std::vector<std::size_t> convex_hull_indices(const std::vector<Point2>& pts) {
  std::vector<std::size_t> uniq;
  uniq.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dup = false;
    for (std::size_t j : uniq) {
      if (dist(pts[i], pts[j]) <= kGeomTol) {
        dup = true;
        break;
      }
    }
    if (!dup) uniq.push_back(i);
  }
  if (uniq.size() < 3) throw DegenerateInput("convex hull needs at least 3 distinct points");

  // Lowest point (then lowest x) is certainly on the hull.
  std::size_t start = uniq[0];
  for (std::size_t i : uniq) {
    if (pts[i].y < pts[start].y - kGeomTol ||
        (pts[i].y < pts[start].y + kGeomTol && pts[i].x < pts[start].x)) {
      start = i;
    }
  }

  std::vector<std::size_t> hull;
  std::size_t cur = start;
  do {
    hull.push_back(cur);
    std::size_t best = uniq[0] == cur && uniq.size() > 1 ? uniq[1] : uniq[0];
    for (std::size_t cand : uniq) {
      if (cand == cur) continue;
      if (best == cur) {
        best = cand;
        continue;
      }
      const double o = orient2d(pts[cur], pts[best], pts[cand]);
      if (o < -kGeomTol) {
        best = cand;  // cand is more clockwise: wrap CCW by always taking the rightmost
      } else if (std::abs(o) <= kGeomTol &&
                 dist(pts[cur], pts[cand]) > dist(pts[cur], pts[best])) {
        best = cand;  // collinear: take the farthest
      }
    }
    cur = best;
    if (hull.size() > uniq.size()) throw DegenerateInput("convex hull failed to close");
  } while (cur != start);

  if (hull.size() < 3) throw DegenerateInput("all points collinear");
  return hull;
}

inline ConvexPolygon convex_hull(const PointSet& points) {
  if (points.size() < 3) throw DegenerateInput("convex hull needs at least 3 points");
  const auto idx = convex_hull_indices(points);
  ConvexPolygon poly;
  poly.vertices.reserve(idx.size());
  for (std::size_t i : idx) poly.vertices.push_back(points[i]);
  return poly;
}

// Minimum-area enclosing rectangle via the edge-aligned (rotating calipers)
// sweep: the optimal rectangle has one edge collinear with a hull edge.
inline RotatedRect min_area_rect(const PointSet& points) {
  const ConvexPolygon hull = convex_hull(points);
  const auto& v = hull.vertices;
  const std::size_t n = v.size();

  double best_area = std::numeric_limits<double>::infinity();
  RotatedRect best;
  for (std::size_t i = 0; i < n; ++i) {
    Point2 e = v[(i + 1) % n] - v[i];
    const double len = norm(e);
    if (len <= kGeomTol) continue;
    const Point2 u{e.x / len, e.y / len};
    const Point2 w{-u.y, u.x};
    double lo_u = std::numeric_limits<double>::infinity(), hi_u = -lo_u;
    double lo_w = lo_u, hi_w = -lo_u;
    for (const Point2& p : v) {
      const double pu = dot(p, u), pw = dot(p, w);
      lo_u = std::min(lo_u, pu);
      hi_u = std::max(hi_u, pu);
      lo_w = std::min(lo_w, pw);
      hi_w = std::max(hi_w, pw);
    }
    const double width = hi_u - lo_u, height = hi_w - lo_w;
    const double area = width * height;
    if (area < best_area) {
      best_area = area;
      const double cu = 0.5 * (lo_u + hi_u), cw = 0.5 * (lo_w + hi_w);
      best.center = u * cu + w * cw;
      best.width = width;
      best.height = height;
      best.angle_deg = std::atan2(u.y, u.x) * 180.0 / M_PI;
    }
  }

  // Canonicalize: width >= height, angle in [-90, 90).
  if (best.width < best.height) {
    std::swap(best.width, best.height);
    best.angle_deg += 90.0;
  }
  while (best.angle_deg >= 90.0) best.angle_deg -= 180.0;
  while (best.angle_deg < -90.0) best.angle_deg += 180.0;
  return best;
}

inline bool quad_is_simple(const QuadBox& q) {
  // A quadrilateral is self-intersecting iff its two diagonally-opposite
  // edge pairs cross: (0,1)x(2,3) or (1,2)x(3,0).
  auto segments_cross = [](const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
    const double d1 = orient2d(c, d, a);
    const double d2 = orient2d(c, d, b);
    const double d3 = orient2d(a, b, c);
    const double d4 = orient2d(a, b, d);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
  };
  return !segments_cross(q[0], q[1], q[2], q[3]) && !segments_cross(q[1], q[2], q[3], q[0]);
}

// For each GT corner, pick the nearest point of the set (ties broken by
// lowest index); reorders CCW before returning. `selected` (optional)
// receives the chosen point indices aligned with the returned corners.
inline QuadBox nearest_gt_corner(const PointSet& point_set, const QuadBox& gt,
                                 std::array<std::size_t, 4>* selected = nullptr) {
  if (point_set.empty()) throw InvalidArgument("empty point set");
  QuadBox out;
  std::array<std::size_t, 4> sel{};
  for (std::size_t c = 0; c < 4; ++c) {
    std::size_t best = 0;
    double best_d = dist(point_set[0], gt[c]);
    for (std::size_t i = 1; i < point_set.size(); ++i) {
      const double d = dist(point_set[i], gt[c]);
      if (d < best_d - kGeomTol) {
        best = i;
        best_d = d;
      }
    }
    out[c] = point_set[best];
    sel[c] = best;
  }
  if (polygon_area(out) < 0) {
    std::reverse(out.begin(), out.end());
    std::reverse(sel.begin(), sel.end());
  }
  if (!quad_is_simple(out) || polygon_area(out) <= kGeomTol) {
    throw DegenerateOutput("nearest-corner quadrilateral is degenerate");
  }
  if (selected) *selected = sel;
  return out;
}

inline bool point_in_convex_polygon(const Point2& p, const ConvexPolygon& poly) {
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (orient2d(v[i], v[(i + 1) % n], p) < -kGeomTol) return false;
  }
  return true;  // boundary counts as inside
}

inline bool point_in_quad(const Point2& p, const QuadBox& q) {
  for (std::size_t i = 0; i < 4; ++i) {
    if (orient2d(q[i], q[(i + 1) % 4], p) < -kGeomTol) return false;
  }
  return true;
}

// Sutherland-Hodgman clip of convex polygon `a` by convex polygon `b`.
// Returns std::nullopt when the intersection has measure zero (disjoint or
// touching-only contact).
inline std::optional<ConvexPolygon> convex_intersect(const ConvexPolygon& a,
                                                     const ConvexPolygon& b) {
  std::vector<Point2> cur = a.vertices;
  const auto& bv = b.vertices;
  for (std::size_t j = 0; j < bv.size() && !cur.empty(); ++j) {
    const Point2& c1 = bv[j];
    const Point2& c2 = bv[(j + 1) % bv.size()];
    std::vector<Point2> next;
    next.reserve(cur.size() + 2);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const Point2& p = cur[i];
      const Point2& q = cur[(i + 1) % cur.size()];
      const double dp = orient2d(c1, c2, p);
      const double dq = orient2d(c1, c2, q);
      if (dp >= -kGeomTol) next.push_back(p);
      if ((dp > kGeomTol && dq < -kGeomTol) || (dp < -kGeomTol && dq > kGeomTol)) {
        const double t = dp / (dp - dq);
        next.push_back(p + (q - p) * t);
      }
    }
    cur = std::move(next);
  }
  // Drop consecutive duplicates introduced by clipping on shared edges.
  std::vector<Point2> clean;
  for (const Point2& p : cur) {
    if (clean.empty() || dist(clean.back(), p) > kGeomTol) clean.push_back(p);
  }
  while (clean.size() > 1 && dist(clean.front(), clean.back()) <= kGeomTol) clean.pop_back();
  if (clean.size() < 3 || polygon_area(clean) <= kGeomTol) return std::nullopt;
  return ConvexPolygon{std::move(clean)};
}

inline double polygon_iou(const ConvexPolygon& a, const ConvexPolygon& b) {
  const double area_a = polygon_area(a);
  const double area_b = polygon_area(b);
  if (area_a <= kGeomTol || area_b <= kGeomTol) {
    throw InvalidGeometry("polygon_iou requires positive areas");
  }
  const auto inter = convex_intersect(a, b);
  const double ai = inter ? polygon_area(*inter) : 0.0;
  return ai / (area_a + area_b - ai);
}

// GIoU with the enclosing region C taken as the convex hull of both vertex
// sets (the tightest convex enclosure).
inline double polygon_giou(const ConvexPolygon& a, const ConvexPolygon& b) {
  const double area_a = polygon_area(a);
  const double area_b = polygon_area(b);
  if (area_a <= kGeomTol || area_b <= kGeomTol) {
    throw InvalidGeometry("polygon_giou requires positive areas");
  }
  const auto inter = convex_intersect(a, b);
  const double ai = inter ? polygon_area(*inter) : 0.0;
  const double un = area_a + area_b - ai;

  std::vector<Point2> all = a.vertices;
  all.insert(all.end(), b.vertices.begin(), b.vertices.end());
  const auto hull_idx = convex_hull_indices(all);
  std::vector<Point2> hull;
  hull.reserve(hull_idx.size());
  for (std::size_t i : hull_idx) hull.push_back(all[i]);
  const double area_c = polygon_area(hull);
  return ai / un - (area_c - un) / area_c;
}

inline ConvexPolygon to_polygon(const QuadBox& q) {
  return ConvexPolygon{std::vector<Point2>(q.begin(), q.end())};
}

inline double quad_iou(const QuadBox& a, const QuadBox& b) {
  return polygon_iou(to_polygon(a), to_polygon(b));
}

// n/4 equally spaced samples per edge, starting at each corner (each corner
// emitted exactly once), following CCW corner order.
inline std::vector<Point2> sample_contour_points(const QuadBox& box, std::size_t n) {
  if (n == 0 || n % 4 != 0) throw InvalidArgument("sample count must be divisible by 4");
  const std::size_t per_edge = n / 4;
  std::vector<Point2> out;
  out.reserve(n);
  for (std::size_t e = 0; e < 4; ++e) {
    const Point2& a = box[e];
    const Point2& b = box[(e + 1) % 4];
    for (std::size_t j = 0; j < per_edge; ++j) {
      const double t = static_cast<double>(j) / static_cast<double>(per_edge);
      out.push_back(a + (b - a) * t);
    }
  }
  return out;
}

// Symmetric Chamfer distance between two point lists.
inline double chamfer_distance(const std::vector<Point2>& p, const std::vector<Point2>& q) {
  if (p.empty() || q.empty()) throw InvalidArgument("chamfer_distance on empty input");
  double sum_p = 0.0;
  for (const Point2& a : p) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point2& b : q) best = std::min(best, dist(a, b));
    sum_p += best;
  }
  double sum_q = 0.0;
  for (const Point2& b : q) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point2& a : p) best = std::min(best, dist(a, b));
    sum_q += best;
  }
  return 0.5 * sum_p / static_cast<double>(p.size()) + 0.5 * sum_q / static_cast<double>(q.size());
}

inline Point2 quad_center(const QuadBox& q) {
  return {(q[0].x + q[1].x + q[2].x + q[3].x) * 0.25, (q[0].y + q[1].y + q[2].y + q[3].y) * 0.25};
}

}  // namespace orp
