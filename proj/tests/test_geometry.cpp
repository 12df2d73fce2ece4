#include <doctest.h>

#include <random>
#include <set>

#include "orp/geometry.hpp"
#include "test_oracles.hpp"

using namespace orp;

namespace {

ConvexPolygon unit_square() {
  return ConvexPolygon{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
}

ConvexPolygon shifted(const ConvexPolygon& p, double dx, double dy) {
  ConvexPolygon out = p;
  for (Point2& v : out.vertices) {
    v.x += dx;
    v.y += dy;
  }
  return out;
}

}  // namespace

TEST_CASE("convex_hull: square corners with interior center") {
  PointSet ps{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  const ConvexPolygon h = convex_hull(ps);
  CHECK(h.vertices.size() == 4);
  for (const Point2& v : h.vertices) {
    CHECK(dist(v, {0.5, 0.5}) > 0.1);  // center excluded
  }
  CHECK(polygon_area(h) == doctest::Approx(1.0));
}

TEST_CASE("convex_hull: triangle is its own hull") {
  PointSet ps{{0, 0}, {2, 0}, {1, 1.5}};
  const ConvexPolygon h = convex_hull(ps);
  CHECK(h.vertices.size() == 3);
  CHECK(polygon_area(h) > 0);
}

TEST_CASE("convex_hull: degenerate input throws") {
  CHECK_THROWS_AS(convex_hull(PointSet{{0, 0}, {1, 1}}), DegenerateInput);
  CHECK_THROWS_AS(convex_hull(PointSet{{0, 0}, {1, 1}, {2, 2}, {3, 3}}), DegenerateInput);
  CHECK_THROWS_AS(convex_hull(PointSet{{1, 1}, {1, 1}, {1, 1}}), DegenerateInput);
}

TEST_CASE("convex_hull matches brute-force oracle on seeded random sets") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const PointSet ps = oracle::random_points(rng, 9, 0.0, 1.0);
    const auto expected = oracle::hull_vertices_bruteforce(ps);
    const ConvexPolygon h = convex_hull(ps);
    std::set<std::pair<double, double>> got;
    for (const Point2& v : h.vertices) got.insert({v.x, v.y});
    CHECK(got == expected);
  }
}

TEST_CASE("convex_hull idempotence and containment") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const PointSet ps = oracle::random_points(rng, 9, -5.0, 5.0);
    const ConvexPolygon h = convex_hull(ps);
    const ConvexPolygon h2 = convex_hull(h.vertices);
    REQUIRE(h.vertices.size() == h2.vertices.size());
    for (const Point2& p : ps) CHECK(point_in_convex_polygon(p, h));
  }
}

TEST_CASE("min_area_rect: axis-aligned unit square") {
  const RotatedRect r = min_area_rect({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  CHECK(r.center.x == doctest::Approx(0.5));
  CHECK(r.center.y == doctest::Approx(0.5));
  CHECK(r.width == doctest::Approx(1.0));
  CHECK(r.height == doctest::Approx(1.0));
  CHECK(r.angle_deg == doctest::Approx(0.0));
}

TEST_CASE("min_area_rect: square rotated 45 degrees") {
  PointSet ps;
  const double c = std::cos(M_PI / 4), s = std::sin(M_PI / 4);
  for (const Point2& p : PointSet{{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}}) {
    ps.push_back({0.5 + c * p.x - s * p.y, 0.5 + s * p.x + c * p.y});
  }
  const RotatedRect r = min_area_rect(ps);
  CHECK(r.center.x == doctest::Approx(0.5));
  CHECK(r.center.y == doctest::Approx(0.5));
  CHECK(r.width == doctest::Approx(1.0));
  CHECK(r.height == doctest::Approx(1.0));
  CHECK(std::abs(r.angle_deg) == doctest::Approx(45.0));
  CHECK(r.angle_deg >= -90.0);
  CHECK(r.angle_deg < 90.0);
}

TEST_CASE("min_area_rect matches rotation-sweep oracle and contains inputs") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const PointSet ps = oracle::random_points(rng, 9, 0.0, 10.0);
    const RotatedRect r = min_area_rect(ps);
    const double sweep = oracle::min_rect_area_sweep(ps);
    CHECK(r.width * r.height <= sweep + 1e-9);
    CHECK(std::abs(r.width * r.height - sweep) / sweep < 1e-6);
    const ConvexPolygon rect = to_polygon(r.corners());
    for (const Point2& p : ps) CHECK(point_in_convex_polygon(p, rect));
  }
}

TEST_CASE("nearest_gt_corner: exact corners recovered") {
  const QuadBox gt{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
  PointSet ps{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.4, 0.4}, {0.6, 0.4}, {0.5, 0.6}, {0.3, 0.7},
              {0.7, 0.2}};
  const QuadBox q = nearest_gt_corner(ps, gt);
  for (std::size_t i = 0; i < 4; ++i) CHECK(dist(q[i], gt[i]) < 1e-12);
}

TEST_CASE("nearest_gt_corner: coincident points are degenerate") {
  const QuadBox gt{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
  PointSet ps(9, Point2{0.5, 0.5});
  CHECK_THROWS_AS(nearest_gt_corner(ps, gt), DegenerateOutput);
}

TEST_CASE("nearest_gt_corner matches exhaustive search on seeded sets") {
  std::mt19937_64 rng(31);
  const QuadBox gt{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
  int checked = 0;
  while (checked < 100) {
    const PointSet ps = oracle::random_points(rng, 9, -0.5, 1.5);
    QuadBox got;
    try {
      got = nearest_gt_corner(ps, gt);
    } catch (const DegenerateOutput&) {
      continue;
    }
    ++checked;
    // Exhaustive nearest point per corner (as a set: output may be reversed).
    std::set<std::pair<double, double>> expect;
    for (std::size_t c = 0; c < 4; ++c) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < ps.size(); ++i) {
        if (dist(ps[i], gt[c]) < dist(ps[best], gt[c])) best = i;
      }
      expect.insert({ps[best].x, ps[best].y});
    }
    std::set<std::pair<double, double>> got_set;
    for (const Point2& p : got) got_set.insert({p.x, p.y});
    CHECK(got_set == expect);
  }
}

TEST_CASE("polygon_area basics and fan oracle") {
  CHECK(polygon_area(unit_square()) == doctest::Approx(1.0));
  CHECK(polygon_area(ConvexPolygon{{{0, 0}, {1, 0}, {0, 1}}}) == doctest::Approx(0.5));
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const ConvexPolygon poly = oracle::random_convex_polygon(rng, 0.0, 4.0);
    CHECK(polygon_area(poly) == doctest::Approx(oracle::fan_area(poly.vertices)).epsilon(1e-12));
  }
}

TEST_CASE("convex_intersect: identity, disjoint, overlap") {
  const ConvexPolygon sq = unit_square();
  auto same = convex_intersect(sq, sq);
  REQUIRE(same.has_value());
  CHECK(polygon_area(*same) == doctest::Approx(1.0));

  CHECK_FALSE(convex_intersect(sq, shifted(sq, 2, 0)).has_value());
  CHECK_FALSE(convex_intersect(sq, shifted(sq, 1, 0)).has_value());  // touching edge

  auto half = convex_intersect(sq, shifted(sq, 0.5, 0));
  REQUIRE(half.has_value());
  CHECK(polygon_area(*half) == doctest::Approx(0.5));
  const auto mc = oracle::mc_intersection_area(sq, shifted(sq, 0.5, 0), 1000000, 99);
  CHECK(std::abs(polygon_area(*half) - mc.area) < 2e-3);
}

TEST_CASE("convex_intersect agrees with Monte-Carlo on seeded pairs") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const ConvexPolygon a = oracle::random_convex_polygon(rng, 0.0, 3.0);
    const ConvexPolygon b = oracle::random_convex_polygon(rng, 1.0, 4.0);
    const auto inter = convex_intersect(a, b);
    const double area = inter ? polygon_area(*inter) : 0.0;
    const auto mc = oracle::mc_intersection_area(a, b, 200000, 1000 + trial);
    CHECK(std::abs(area - mc.area) <= 3.0 * mc.stderr_ + 1e-6);
  }
}

TEST_CASE("polygon_iou: hand values and symmetry") {
  const ConvexPolygon sq = unit_square();
  CHECK(polygon_iou(sq, sq) == doctest::Approx(1.0));
  CHECK(polygon_iou(sq, shifted(sq, 3, 3)) == doctest::Approx(0.0));
  CHECK(polygon_iou(sq, shifted(sq, 0.5, 0)) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(polygon_iou(shifted(sq, 0.5, 0), sq) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK_THROWS_AS(polygon_iou(ConvexPolygon{{{0, 0}, {1, 0}, {2, 0}}}, sq), InvalidGeometry);
}

TEST_CASE("polygon_giou: hand values and limits") {
  const ConvexPolygon sq = unit_square();
  CHECK(polygon_giou(sq, sq) == doctest::Approx(1.0));
  CHECK(polygon_giou(sq, shifted(sq, 0.5, 0)) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(polygon_giou(sq, shifted(sq, 100, 0)) < -0.95);
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const ConvexPolygon a = oracle::random_convex_polygon(rng, 0.0, 3.0);
    const ConvexPolygon b = oracle::random_convex_polygon(rng, 0.5, 3.5);
    CHECK(polygon_giou(a, b) <= polygon_iou(a, b) + 1e-12);
    const double iou = polygon_iou(a, b);
    CHECK(iou >= 0.0);
    CHECK(iou <= 1.0);
  }
}

TEST_CASE("rigid-motion invariance of IoU, GIoU and Chamfer") {
  std::mt19937_64 rng(91);
  for (int trial = 0; trial < 20; ++trial) {
    const ConvexPolygon a = oracle::random_convex_polygon(rng, 0.0, 3.0);
    const ConvexPolygon b = oracle::random_convex_polygon(rng, 1.0, 4.0);
    const double theta = uniform_in(rng, -M_PI, M_PI);
    const Point2 t{uniform_in(rng, -10, 10), uniform_in(rng, -10, 10)};
    auto move = [&](const std::vector<Point2>& v) {
      std::vector<Point2> out;
      for (const Point2& p : v) {
        out.push_back({std::cos(theta) * p.x - std::sin(theta) * p.y + t.x,
                       std::sin(theta) * p.x + std::cos(theta) * p.y + t.y});
      }
      return out;
    };
    const ConvexPolygon am{move(a.vertices)}, bm{move(b.vertices)};
    CHECK(polygon_iou(am, bm) == doctest::Approx(polygon_iou(a, b)).epsilon(1e-9));
    CHECK(polygon_giou(am, bm) == doctest::Approx(polygon_giou(a, b)).epsilon(1e-9));
    CHECK(chamfer_distance(am.vertices, bm.vertices) ==
          doctest::Approx(chamfer_distance(a.vertices, b.vertices)).epsilon(1e-9));
  }
}

TEST_CASE("sample_contour_points: corners, midpoints, equal spacing") {
  const QuadBox sq{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
  const auto four = sample_contour_points(sq, 4);
  REQUIRE(four.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(dist(four[i], sq[i]) < 1e-15);

  const auto eight = sample_contour_points(sq, 8);
  REQUIRE(eight.size() == 8);
  CHECK(dist(eight[1], {0.5, 0.0}) < 1e-15);
  CHECK(dist(eight[3], {1.0, 0.5}) < 1e-15);

  const QuadBox quad{{{0, 0}, {4, 1}, {5, 6}, {-1, 3}}};
  const auto forty = sample_contour_points(quad, 40);
  REQUIRE(forty.size() == 40);
  for (std::size_t e = 0; e < 4; ++e) {
    for (std::size_t j = 1; j + 1 < 10; ++j) {
      const double d1 = dist(forty[e * 10 + j], forty[e * 10 + j - 1]);
      const double d2 = dist(forty[e * 10 + j + 1], forty[e * 10 + j]);
      CHECK(std::abs(d1 - d2) < 1e-12);
    }
  }
  CHECK_THROWS_AS(sample_contour_points(sq, 10), InvalidArgument);
}

TEST_CASE("chamfer_distance: basics and brute-force agreement") {
  CHECK(chamfer_distance({{0, 0}, {1, 1}}, {{0, 0}, {1, 1}}) == doctest::Approx(0.0));
  CHECK(chamfer_distance({{0, 0}}, {{1, 0}}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(chamfer_distance({}, {{0, 0}}), InvalidArgument);

  const QuadBox r0 = make_oriented_box({0, 0}, 2, 1, 0);
  const QuadBox r90 = make_oriented_box({0, 0}, 2, 1, 90);
  const auto c0 = sample_contour_points(r0, 40);
  const auto c90 = sample_contour_points(r90, 40);
  const double cd = chamfer_distance(c0, c90);
  CHECK(cd > 0.0);
  CHECK(cd == doctest::Approx(oracle::chamfer_bruteforce(c0, c90)).epsilon(1e-15));

  // symmetry
  std::mt19937_64 rng(13);
  const auto p = oracle::random_points(rng, 12, 0, 5);
  const auto q = oracle::random_points(rng, 7, 0, 5);
  CHECK(chamfer_distance(p, q) == doctest::Approx(chamfer_distance(q, p)));
}

TEST_CASE("point_in_convex_polygon: interior, exterior, boundary") {
  const ConvexPolygon sq = unit_square();
  CHECK(point_in_convex_polygon({0.5, 0.5}, sq));
  CHECK_FALSE(point_in_convex_polygon({2, 2}, sq));
  CHECK(point_in_convex_polygon({1.0, 0.5}, sq));  // boundary counts as inside
}
