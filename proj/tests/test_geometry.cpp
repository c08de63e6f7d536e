#include <gtest/gtest.h>

#include <set>

#include "gapflight/track.hpp"
#include "oracles.hpp"

using namespace gapflight;
using namespace gapflight::testing;

namespace {

GapSpec level_gap(GapShape shape = Rectangle{0.6, 0.2}, double roll = 0.0) {
  return GapSpec::from_normal_roll(Vec3(0.0, 0.0, 1.5), Vec3::UnitX(), roll, std::move(shape));
}

QuadrotorState at(const Vec3& p, const Quat& q = Quat::Identity()) {
  QuadrotorState s;
  s.position = p;
  s.attitude = q;
  return s;
}

// Arc-length position of a boundary point on a convex polygon.
double arc_position(const std::vector<Vec2>& poly, const Vec2& p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    if (segment_distance(p, a, b) < 1e-12) return acc + (p - a).norm();
    acc += (b - a).norm();
  }
  return -1.0;
}

}  // namespace

TEST(GapFrame, AxesAreOrthonormal) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const GapSpec g = random_gap(rng, Rectangle{});
    EXPECT_NEAR(g.normal().dot(g.axis_u()), 0.0, 1e-12);
    EXPECT_NEAR(g.normal().dot(g.axis_v()), 0.0, 1e-12);
    EXPECT_NEAR(g.normal().cross(g.axis_u()).dot(g.axis_v()), 1.0, 1e-12);
  }
}

TEST(GapFrame, RollRoundTrip) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    Vec3 n = random_unit(rng);
    n.z() = std::clamp(n.z(), -0.9, 0.9);
    const double roll = rng.uniform(-3.0, 3.0);
    const GapSpec g = GapSpec::from_normal_roll(Vec3::Zero(), n, roll, Rectangle{});
    EXPECT_NEAR(wrap_angle(g.roll() - roll), 0.0, 1e-9);
  }
}

TEST(GapFrame, ZeroRollKeepsUHorizontal) {
  const GapSpec g = level_gap();
  EXPECT_NEAR(g.axis_u().z(), 0.0, 1e-15);
  EXPECT_NEAR(g.yaw(), 0.0, 1e-15);
  EXPECT_NEAR(g.pitch(), 0.0, 1e-15);
}

TEST(GapFrame, PlaneCoordinatesRoundTrip) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const GapSpec g = random_gap(rng, Rectangle{});
    const Vec2 uv(rng.uniform(-1, 1), rng.uniform(-1, 1));
    EXPECT_LT((g.to_plane(g.to_world(uv)) - uv).norm(), 1e-12);
  }
}

TEST(GapCoordinate, Examples) {
  const GapSpec g = level_gap();
  EXPECT_EQ(gap_coordinate(at(g.center), g), 0.0);
  EXPECT_NEAR(gap_coordinate(at(g.center - 1.0 * g.normal()), g), -1.0, 1e-15);
}

TEST(GapCoordinate, InvariantUnderRigidTransform) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const GapSpec g = random_gap(rng, Rectangle{});
    const QuadrotorState s = random_state(rng);
    const Quat R = random_quat(rng);
    const Vec3 t = random_vec(rng, 10.0);
    QuadrotorState s2 = s;
    s2.position = R * s.position + t;
    s2.attitude = R * s.attitude;
    const GapSpec g2 = g.transformed(R, t);
    EXPECT_NEAR(gap_coordinate(s2, g2), gap_coordinate(s, g), 1e-9);
    const auto a = corner_gap_coordinates(s, g, ColliderSpec{});
    const auto b = corner_gap_coordinates(s2, g2, ColliderSpec{});
    for (int k = 0; k < 8; ++k) EXPECT_NEAR(a[k], b[k], 1e-9);
    EXPECT_EQ(clearance_check(s, g, ColliderSpec{}).classification,
              clearance_check(s2, g2, ColliderSpec{}).classification);
  }
}

TEST(Clearance, LevelVehicleFitsLevelSlot) {
  const GapSpec g = level_gap();
  const auto s = at(g.center);
  EXPECT_EQ(clearance_check(s, g, ColliderSpec{}).classification, Clearance::InPlaneSafe);
  EXPECT_EQ(surface_oracle(s, g, ColliderSpec{}).classification, Clearance::InPlaneSafe);
}

TEST(Clearance, LevelVehicleHitsUprightSlot) {
  const GapSpec g = level_gap(Rectangle{0.6, 0.2}, kPi / 2);
  const auto s = at(g.center);
  const auto r = clearance_check(s, g, ColliderSpec{});
  EXPECT_EQ(r.classification, Clearance::Collision);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_NEAR(gap_coordinate(*r.witness, g), 0.0, 1e-9);
  EXPECT_FALSE(contains(g.shape, g.to_plane(*r.witness)));
  EXPECT_EQ(surface_oracle(s, g, ColliderSpec{}).classification, Clearance::Collision);
}

TEST(Clearance, RolledVehicleFitsRolledSlot) {
  const double roll = 1.0;
  const GapSpec g = level_gap(Rectangle{0.6, 0.2}, roll);
  EXPECT_EQ(clearance_check(at(g.center, quat_from_euler(roll, 0, 0)), g, ColliderSpec{}).classification,
            Clearance::InPlaneSafe);
}

TEST(Clearance, FarVehicleIsFree) {
  const GapSpec g = level_gap();
  const auto s = at(g.center - 5.0 * g.normal(), quat_from_euler(0.3, 0.2, 0.1));
  EXPECT_EQ(clearance_check(s, g, ColliderSpec{}).classification, Clearance::Free);
  EXPECT_TRUE(plane_cross_section(s, g, ColliderSpec{}).empty());
}

TEST(Clearance, CrossSectionLiesOnPlane) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const GapSpec g = random_gap(rng, Rectangle{});
    const auto s = pose_near_gap(rng, g);
    const auto poly = plane_cross_section(s, g, ColliderSpec{});
    if (poly.empty()) continue;
    EXPECT_GE(poly.size(), 3u);
    // every vertex is a point of the collider box
    for (const Vec2& p : poly) {
      const Vec3 local = s.attitude.conjugate() * (g.to_world(p) - s.position);
      EXPECT_LE((local.cwiseAbs() - ColliderSpec{}.half_extents).maxCoeff(), 1e-9);
    }
  }
}

TEST(Clearance, AgreesWithSurfaceSampling) {
  Rng rng(6);
  const ColliderSpec col;
  int counts[3] = {0, 0, 0};
  for (const GapShape& shape : all_shapes()) {
    for (int i = 0; i < 300; ++i) {
      const GapSpec g = random_gap(rng, shape);
      const auto s = pose_near_gap(rng, g);
      const auto fast = clearance_check(s, g, col).classification;
      const auto slow = surface_oracle(s, g, col, 21);
      ++counts[static_cast<int>(fast)];
      if (fast != slow.classification) {
        EXPECT_LT(min_boundary_distance(g.shape, slow.cut_points), 1e-3)
            << shape_kind(shape) << " pose " << i << ": " << to_string(fast) << " vs "
            << to_string(slow.classification);
      }
    }
  }
  // the generator must exercise every class
  for (int c : counts) EXPECT_GT(c, 20);
}

TEST(Clearance, MonotoneInScale) {
  Rng rng(7);
  for (const GapShape& shape : all_shapes()) {
    for (int i = 0; i < 200; ++i) {
      const GapSpec g = random_gap(rng, shape);
      const auto s = pose_near_gap(rng, g);
      if (clearance_check(s, g, ColliderSpec{}).classification != Clearance::InPlaneSafe) continue;
      GapSpec bigger = g;
      bigger.shape = scaled(shape, rng.uniform(1.0, 2.0));
      EXPECT_EQ(clearance_check(s, bigger, ColliderSpec{}).classification, Clearance::InPlaneSafe);
    }
  }
}

TEST(Clearance, RejectsDegenerateShapes) {
  EXPECT_THROW(validate(Rectangle{-0.1, 0.2}), std::invalid_argument);
  EXPECT_THROW(validate(Triangle{{Vec2(0, 0), Vec2(1, 1), Vec2(2, 2)}}), std::invalid_argument);
  EXPECT_THROW(validate(Arch{0.3, 0.2, 0.4}), std::invalid_argument);
  EXPECT_THROW(validate(Ellipse{0.0, 0.1}), std::invalid_argument);
  for (const auto& s : all_shapes()) EXPECT_NO_THROW(validate(s));
}

TEST(FullyTraversed, BoundaryRule) {
  const GapSpec g = level_gap();
  const ColliderSpec col;
  const double hx = col.half_extents.x();
  EXPECT_TRUE(fully_traversed(at(g.center + (hx + 0.01) * g.normal()), g, col));
  EXPECT_FALSE(fully_traversed(at(g.center), g, col));
  EXPECT_FALSE(fully_traversed(at(Vec3(hx, 0.0, 1.5)), g, col));
  EXPECT_FALSE(fully_traversed(at(g.center - 3.0 * g.normal()), g, col));
}

TEST(EdgeSamples, UnitSquareCorners) {
  const auto pts = sample_boundary(Rectangle{1.0, 1.0}, 4);
  ASSERT_EQ(pts.size(), 4u);
  std::set<std::pair<double, double>> corners;
  for (const auto& p : pts) corners.insert({p.x(), p.y()});
  const std::set<std::pair<double, double>> expected{{-0.5, -0.5}, {-0.5, 0.5}, {0.5, -0.5}, {0.5, 0.5}};
  EXPECT_EQ(corners, expected);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR((pts[k] - pts[(k + 1) % 4]).norm(), 1.0, 1e-15);
}

TEST(EdgeSamples, EllipsePointsOnCurve) {
  const Ellipse e{0.35, 0.14};
  for (int n : {3, 7, 32, 101}) {
    for (const auto& p : sample_boundary(e, n)) {
      const double f = std::pow(p.x() / e.semi_u, 2) + std::pow(p.y() / e.semi_v, 2);
      EXPECT_NEAR(f, 1.0, 1e-9);
    }
  }
}

TEST(EdgeSamples, EqualArcSpacingOnPolygons) {
  for (const auto& shape : all_shapes()) {
    if (!is_polygonal(shape)) continue;
    const auto poly = polygon_vertices(shape);
    double perim = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) perim += (poly[(i + 1) % poly.size()] - poly[i]).norm();
    const int n = 37;
    const auto pts = sample_boundary(shape, n);
    for (int k = 0; k < n; ++k)
      EXPECT_NEAR(arc_position(poly, pts[k]), perim * k / n, 1e-9) << shape_kind(shape) << " sample " << k;
  }
}

TEST(EdgeSamples, EllipseHasEqualChords) {
  // at high n, equal arc spacing means nearly equal chords
  const GapShape shape = Ellipse{};
  const int n = 2000;
  const auto pts = sample_boundary(shape, n);
  const double step = perimeter(shape) / n;
  for (int k = 0; k < n; ++k) EXPECT_NEAR((pts[(k + 1) % n] - pts[k]).norm(), step, 1e-8);
}

TEST(EdgeSamples, AllOnBoundary) {
  for (const auto& shape : all_shapes()) {
    for (const auto& p : sample_boundary(shape, 64)) {
      const Vec2 out = p * (1.0 + 1e-6), in = p * (1.0 - 1e-6);
      EXPECT_TRUE(contains(shape, p) || contains(shape, in)) << shape_kind(shape);
      EXPECT_FALSE(contains(shape, out * 1.01)) << shape_kind(shape);
    }
  }
}

TEST(EdgeSamples, EquivariantUnderRigidMotion) {
  Rng rng(8);
  for (const auto& shape : all_shapes()) {
    const GapSpec g = random_gap(rng, shape);
    const Quat R = random_quat(rng);
    const Vec3 t = random_vec(rng, 5.0);
    const auto a = sample_edge_points(g, 16);
    const auto b = sample_edge_points(g.transformed(R, t), 16);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_LT((R * a[k] + t - b[k]).norm(), 1e-12);
  }
}

TEST(EdgeSamples, RejectsTooFew) { EXPECT_THROW(sample_boundary(Rectangle{}, 2), std::invalid_argument); }

TEST(Shapes, CentroidInsideAndPassableCenter) {
  for (const auto& shape : all_shapes()) {
    EXPECT_TRUE(contains(shape, shape_centroid(shape))) << shape_kind(shape);
    EXPECT_FALSE(contains(shape, Vec2(2.0, 2.0)));
  }
  const GapSpec g = level_gap(Arch{});
  EXPECT_LT((g.passable_center() - g.center).norm(), 1e-12);
}

TEST(Shapes, PolygonAreaMatchesMonteCarlo) {
  Rng rng(9);
  for (const auto& shape : all_shapes()) {
    if (!is_polygonal(shape)) continue;
    const double area = std::abs(detail::polygon_signed_area(polygon_vertices(shape)));
    int hits = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) hits += contains(shape, Vec2(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)));
    EXPECT_NEAR(hits / double(n), area, 0.005) << shape_kind(shape);
  }
}

TEST(Tracks, FirstConsecutiveTrack) {
  const auto t = presets::track("track1");
  t.validate();
  Rng rng(10);
  for (int i = 0; i < 500; ++i) {
    const auto gaps = randomize_track(t, rng);
    ASSERT_EQ(gaps.size(), 2u);
    EXPECT_EQ(gaps[0].center, Vec3(0.0, 0.0, 1.5));
    EXPECT_GE(gaps[0].roll(), kPi / 4.3 - 1e-12);
    EXPECT_LE(gaps[0].roll(), kPi / 3.7 + 1e-12);
    EXPECT_GE(gaps[1].center.x(), 0.80);
    EXPECT_LE(gaps[1].center.x(), 0.90);
    EXPECT_GE(gaps[1].roll(), kPi / 7 - 1e-12);
    EXPECT_LE(gaps[1].roll(), kPi / 6 + 1e-12);
  }
}

TEST(Tracks, FourthConsecutiveTrack) {
  const auto t = presets::track("track4");
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto gaps = randomize_track(t, rng);
    ASSERT_EQ(gaps.size(), 3u);
    EXPECT_GE(gaps[1].center.x(), 1.00);
    EXPECT_LE(gaps[1].center.x(), 1.10);
    EXPECT_GE(gaps[1].roll(), -kPi / 18 - 1e-12);
    EXPECT_LE(gaps[1].roll(), -kPi / 36 + 1e-12);
  }
}

TEST(Tracks, AllPresetsValid) {
  for (const auto& name : presets::track_names()) {
    const auto t = presets::track(name);
    EXPECT_NO_THROW(t.validate()) << name;
    EXPECT_EQ(t.name, name);
  }
  EXPECT_THROW(presets::track("nope"), std::invalid_argument);
}

TEST(Tracks, DegenerateRangesAreDeterministic) {
  TrackConfig t;
  TrackGap g;
  g.position = {Interval::point(1.0), Interval::point(2.0), Interval::point(3.0)};
  g.roll = Interval::point(0.4);
  t.gaps = {g};
  Rng a(1), b(999);
  const auto ga = randomize_track(t, a), gb = randomize_track(t, b);
  EXPECT_EQ(ga[0].center, gb[0].center);
  EXPECT_EQ(ga[0].frame.coeffs(), gb[0].frame.coeffs());
  EXPECT_EQ(ga[0].center, Vec3(1.0, 2.0, 3.0));
}

TEST(Tracks, ValidationErrors) {
  TrackConfig t;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  TrackGap a, b;
  b.normal = Vec3::UnitY();
  t.gaps = {a, b};
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t.gaps = {a};
  t.gaps[0].roll = {1.0, 0.0};
  EXPECT_THROW(t.validate(), std::invalid_argument);
}
