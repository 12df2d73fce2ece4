#include <doctest.h>

#include <random>

#include "orp/losses.hpp"
#include "orp/toy_learner.hpp"
#include "test_oracles.hpp"

using namespace orp;

namespace {

const QuadBox kGt = make_oriented_box({5.0, 5.0}, 6.0, 3.0, 20.0);

// A configuration is at a combinatorial boundary when a tiny perturbation
// flips hull membership, corner selection or inside/outside status; such
// draws are excluded from finite-difference comparisons.
bool near_boundary(const PointSet& ps, const QuadBox& gt, double eps = 1e-5) {
  // inside/outside flips
  for (const Point2& p : ps) {
    for (std::size_t i = 0; i < 4; ++i) {
      const Point2 a = gt[i], b = gt[(i + 1) % 4];
      const double d = std::abs(orient2d(a, b, p)) / dist(a, b);
      if (d < eps) return true;
    }
  }
  // hull membership flips: any point within eps of the hull boundary of the rest
  try {
    const ConvexPolygon hull = convex_hull(ps);
    for (const Point2& p : ps) {
      const auto& v = hull.vertices;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const Point2 a = v[i], b = v[(i + 1) % v.size()];
        if (dist(p, a) < 1e-12 || dist(p, b) < 1e-12) continue;  // p is an endpoint
        if (std::abs(orient2d(a, b, p)) / dist(a, b) < eps) return true;
      }
    }
  } catch (const DegenerateInput&) {
    return true;
  }
  // corner-selection ties
  for (std::size_t c = 0; c < 4; ++c) {
    double d0 = 1e300, d1 = 1e300;
    for (const Point2& p : ps) {
      const double d = dist(p, gt[c]);
      if (d < d0) {
        d1 = d0;
        d0 = d;
      } else if (d < d1) {
        d1 = d;
      }
    }
    if (d1 - d0 < eps) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("focal_loss values and gradient") {
  CHECK(focal_loss(1.0 - 1e-12, 1).loss == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(focal_loss(0.5, 1, 0.25, 2.0).loss == doctest::Approx(0.25 * 0.25 * std::log(2.0)));
  CHECK_THROWS_AS(focal_loss(1.5, 1), InvalidArgument);

  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double z = uniform_in(rng, -5.0, 5.0);
    const int y = rng() % 2 ? 1 : 0;
    const double h = 1e-6;
    auto at = [&](double zz) { return focal_loss(sigmoid(zz), y).loss; };
    const double fd = (at(z + h) - at(z - h)) / (2.0 * h);
    const double an = focal_loss(sigmoid(z), y).dloss_dlogit;
    worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-12}));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("grad_check sanity on a quadratic") {
  auto quadratic = [](const PointSet& ps) {
    LossWithGrad out;
    out.grad.resize(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      out.loss += 0.5 * (ps[i].x * ps[i].x + 3.0 * ps[i].y * ps[i].y);
      out.grad[i] = {ps[i].x, 3.0 * ps[i].y};
    }
    return out;
  };
  std::mt19937_64 rng(5);
  const PointSet ps = oracle::random_points(rng, 9, -2.0, 2.0);
  CHECK(grad_check(quadratic, ps, 1e-5) < 1e-8);
}

TEST_CASE("giou_loss_convexhull: zero at exact fit, zero subgradient inside") {
  PointSet ps(kGt.begin(), kGt.end());
  ps.push_back(quad_center(kGt));
  for (int i = 0; i < 4; ++i) {
    ps.push_back(quad_center(kGt) + Point2{0.1 * i, -0.05 * i});
  }
  const auto lg = giou_loss_convexhull(ps, kGt);
  CHECK(lg.loss == doctest::Approx(0.0).epsilon(1e-9));
  for (const Point2& g : lg.grad) CHECK(norm(g) < 1e-6);

  // Interior point perturbation leaves the loss unchanged, gradient exactly 0.
  PointSet moved = ps;
  moved[5] += Point2{0.3, 0.2};
  const auto lg2 = giou_loss_convexhull(moved, kGt);
  CHECK(lg2.loss == doctest::Approx(lg.loss));
  CHECK(lg2.grad[5].x == 0.0);
  CHECK(lg2.grad[5].y == 0.0);
}

TEST_CASE("giou_loss_convexhull matches finite differences on seeded sets") {
  std::mt19937_64 rng(17);
  int checked = 0;
  double worst = 0.0;
  while (checked < 50) {
    const PointSet ps = oracle::random_points(rng, 9, 0.0, 10.0);
    if (near_boundary(ps, kGt)) continue;
    try {
      worst = std::max(
          worst,
          grad_check([&](const PointSet& p) { return giou_loss_convexhull(p, kGt); }, ps, 1e-6));
      ++checked;
    } catch (const DegenerateInput&) {
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("giou_loss_nearestcorner: exact corners give zero loss") {
  PointSet ps(kGt.begin(), kGt.end());
  for (int i = 0; i < 5; ++i) ps.push_back(quad_center(kGt) + Point2{0.2 * i, 0.1});
  const auto lg = giou_loss_nearestcorner(ps, kGt);
  CHECK(lg.loss == doctest::Approx(0.0).epsilon(1e-9));

  // Perturbing a non-selected point leaves the loss unchanged.
  PointSet moved = ps;
  moved[6] += Point2{0.3, -0.2};
  CHECK(giou_loss_nearestcorner(moved, kGt).loss == doctest::Approx(lg.loss));
  CHECK(giou_loss_nearestcorner(moved, kGt).grad[6].x == 0.0);
}

TEST_CASE("giou_loss_nearestcorner matches finite differences on seeded sets") {
  std::mt19937_64 rng(19);
  int checked = 0;
  double worst = 0.0;
  while (checked < 50) {
    const PointSet ps = oracle::random_points(rng, 9, 1.0, 9.0);
    if (near_boundary(ps, kGt)) continue;
    try {
      worst = std::max(
          worst,
          grad_check([&](const PointSet& p) { return giou_loss_nearestcorner(p, kGt); }, ps, 1e-6));
      ++checked;
    } catch (const DegenerateOutput&) {
    } catch (const DegenerateInput&) {
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("spatial_constraint_loss: hand values") {
  const QuadBox gt{{{0, 0}, {4, 0}, {4, 4}, {0, 4}}};  // center (2,2)
  PointSet all_in{{1, 1}, {2, 2}, {3, 3}};
  CHECK(spatial_constraint_loss({all_in}, gt).first == 0.0);

  // One outside point at distance 2 from the center.
  PointSet one_out{{1, 1}, {2, 2}, {2, 6}};  // (2,6) is 4 above center... use (2, 4+eps)?
  // distance from (2,2): point (2,4) is on boundary; use (4.0, 2.0)+(2,0) -> (6,2): outside, d=4
  PointSet p2{{1, 1}, {6, 2}};
  auto [l2, g2] = spatial_constraint_loss({p2}, gt);
  CHECK(l2 == doctest::Approx(4.0));
  CHECK(g2[0][0].x == 0.0);
  CHECK(g2[0][1].x == doctest::Approx(1.0));  // unit vector (1,0), N_a=N_o=1
  CHECK(g2[0][1].y == doctest::Approx(0.0));

  // Two outside points at distances 3 and 5 -> (3+5)/2.
  PointSet p3{{2, 2}, {5, 2}, {2, 7}};
  CHECK(spatial_constraint_loss({p3}, gt).first == doctest::Approx((3.0 + 5.0) / 2.0));

  // Boundary point counts as inside (penalty 0).
  PointSet pb{{2, 2}, {4.0, 2.0}};
  CHECK(spatial_constraint_loss({pb}, gt).first == 0.0);

  CHECK_THROWS_AS(spatial_constraint_loss({}, gt), InvalidArgument);
}

TEST_CASE("spatial_constraint_loss matches finite differences") {
  std::mt19937_64 rng(29);
  int checked = 0;
  double worst = 0.0;
  while (checked < 50) {
    const PointSet ps = oracle::random_points(rng, 9, 0.0, 12.0);
    if (near_boundary(ps, kGt)) continue;
    worst = std::max(worst, grad_check(
                                [&](const PointSet& p) {
                                  auto [loss, grads] = spatial_constraint_loss({p}, kGt);
                                  return LossWithGrad{loss, grads[0]};
                                },
                                ps, 1e-6));
    ++checked;
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("total_loss arithmetic") {
  LossWeights w;
  CHECK(total_loss(0.0, {0, 0, true}, {0, 0, true}, w).total == 0.0);

  const LossBreakdown b = total_loss(1.0, {1.0, 0.0, true}, {1.0, 0.0, true}, w);
  CHECK(b.total == doctest::Approx(2.3));  // 1 + 0.3*1 + 1.0*1
  CHECK_FALSE(b.empty_positives);

  const LossBreakdown e = total_loss(1.0, {1.0, 0.5, true}, {7.0, 3.0, false}, w);
  CHECK(e.empty_positives);
  CHECK(e.loc_refine == 0.0);
  CHECK(e.sc_refine == 0.0);

  std::mt19937_64 rng(31);
  for (int i = 0; i < 20; ++i) {
    const double cls = uniform01(rng), li = uniform01(rng), si = uniform01(rng);
    const double lr = uniform01(rng), sr = uniform01(rng);
    const LossBreakdown r = total_loss(cls, {li, si, true}, {lr, sr, true}, w);
    CHECK(r.total == doctest::Approx(cls + w.lambda1 * (li + si) + w.lambda2 * (lr + sr))
                         .epsilon(1e-12));
  }
}

TEST_CASE("translation equivariance of every loss") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    PointSet ps = oracle::random_points(rng, 9, 0.0, 10.0);
    const Point2 t{uniform_in(rng, -50, 50), uniform_in(rng, -50, 50)};
    PointSet ps_t = ps;
    QuadBox gt_t = kGt;
    for (Point2& p : ps_t) p += t;
    for (Point2& p : gt_t) p += t;
    CHECK(giou_loss_convexhull(ps, kGt).loss ==
          doctest::Approx(giou_loss_convexhull(ps_t, gt_t).loss).epsilon(1e-9));
    CHECK(spatial_constraint_loss({ps}, kGt).first ==
          doctest::Approx(spatial_constraint_loss({ps_t}, gt_t).first).epsilon(1e-9));
    double nc_a = -1.0, nc_b = -2.0;
    try {
      nc_a = giou_loss_nearestcorner(ps, kGt).loss;
      nc_b = giou_loss_nearestcorner(ps_t, gt_t).loss;
    } catch (const DegenerateOutput&) {
      continue;  // degenerate selection: skipped with a warning counter upstream
    }
    CHECK(nc_a == doctest::Approx(nc_b).epsilon(1e-9));
  }
}

TEST_CASE("GIoU losses stay in [0,2)") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const PointSet ps = oracle::random_points(rng, 9, -20.0, 30.0);
    try {
      const double l = giou_loss_convexhull(ps, kGt).loss;
      CHECK(l >= 0.0);
      CHECK(l < 2.0);
    } catch (const DegenerateInput&) {
    }
  }
}
