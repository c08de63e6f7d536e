#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <vector>

#include "gapflight/dynamics.hpp"
#include "gapflight/geometry.hpp"

namespace gapflight {

/// Conservative cuboid around the vehicle, body-aligned.
struct ColliderSpec {
  Vec3 half_extents{0.17, 0.17, 0.055};

  bool valid() const { return (half_extents.array() > 0.0).all() && half_extents.allFinite(); }
};

enum class Clearance { Free, InPlaneSafe, Collision };

inline const char* to_string(Clearance c) {
  switch (c) {
    case Clearance::Free: return "Free";
    case Clearance::InPlaneSafe: return "InPlaneSafe";
    case Clearance::Collision: return "Collision";
  }
  return "?";
}

struct ClearanceResult {
  Clearance classification = Clearance::Free;
  std::optional<Vec3> witness;  // world point on the plane outside the region
};

inline std::array<Vec3, 8> collider_corners(const QuadrotorState& state,
                                            const ColliderSpec& collider) {
  std::array<Vec3, 8> out;
  const Mat3 R = state.rotation();
  const Vec3& h = collider.half_extents;
  for (int i = 0; i < 8; ++i) {
    const Vec3 local((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
    out[static_cast<std::size_t>(i)] = state.position + R * local;
  }
  return out;
}

/// Signed distance of a world point from the gap plane along +X^g.
inline double gap_coordinate(const Vec3& point, const GapSpec& gap) {
  return gap.normal().dot(point - gap.center);
}

inline double gap_coordinate(const QuadrotorState& state, const GapSpec& gap) {
  return gap_coordinate(state.position, gap);
}

inline std::array<double, 8> corner_gap_coordinates(const QuadrotorState& state,
                                                    const GapSpec& gap,
                                                    const ColliderSpec& collider) {
  std::array<double, 8> out;
  const auto corners = collider_corners(state, collider);
  for (std::size_t i = 0; i < 8; ++i) out[i] = gap_coordinate(corners[i], gap);
  return out;
}

/// True iff every collider corner is strictly past the plane.
inline bool fully_traversed(const QuadrotorState& state, const GapSpec& gap,
                            const ColliderSpec& collider) {
  const auto xs = corner_gap_coordinates(state, gap, collider);
  return std::all_of(xs.begin(), xs.end(), [](double x) { return x > 0.0; });
}

namespace detail {

// Andrew's monotone chain; returns CCW hull without repeated points.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a == b; }),
            pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross2(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    const auto& p = pts[i];
    while (k >= t && cross2(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

// Vertices of a convex polygon clipped to v <= level (keep_below) or
// v >= level.
inline std::vector<Vec2> clip_horizontal(const std::vector<Vec2>& poly, double level,
                                         bool keep_below) {
  std::vector<Vec2> out;
  auto inside = [&](const Vec2& p) { return keep_below ? p.y() <= level : p.y() >= level; };
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    if (inside(a)) out.push_back(a);
    if ((a.y() - level) * (b.y() - level) < 0.0) {
      const double t = (level - a.y()) / (b.y() - a.y());
      out.push_back(Vec2(a.x() + t * (b.x() - a.x()), level));
    }
  }
  return out;
}

// First vertex of the plane cross-section that is outside the region, if any.
inline std::optional<Vec2> containment_violation(const GapShape& shape,
                                                 const std::vector<Vec2>& poly) {
  if (const auto* arch = std::get_if<Arch>(&shape)) {
    // Union of rectangle (below the dome line) and half-disc (above it).
    const auto L = arch_layout(*arch);
    for (const Vec2& p : clip_horizontal(poly, L.top, true))
      if (!(std::abs(p.x()) <= L.half_width && p.y() >= L.bottom)) return p;
    const bool has_upper =
        std::any_of(poly.begin(), poly.end(), [&](const Vec2& p) { return p.y() > L.top; });
    if (has_upper) {
      for (const Vec2& p : clip_horizontal(poly, L.top, false)) {
        const double dy = p.y() - L.top;
        if (p.x() * p.x() + dy * dy > L.radius * L.radius) return p;
      }
    }
    return std::nullopt;
  }
  // All other regions are convex: vertex containment is exact.
  for (const Vec2& p : poly)
    if (!contains(shape, p)) return p;
  return std::nullopt;
}

}  // namespace detail

/// Intersection polygon of the collider with the gap plane, in gap-plane
/// coordinates (CCW). Empty when the collider does not touch the plane.
inline std::vector<Vec2> plane_cross_section(const QuadrotorState& state, const GapSpec& gap,
                                             const ColliderSpec& collider) {
  const auto corners = collider_corners(state, collider);
  std::array<double, 8> d;
  for (std::size_t i = 0; i < 8; ++i) d[i] = gap_coordinate(corners[i], gap);
  const bool all_pos = std::all_of(d.begin(), d.end(), [](double x) { return x > 0.0; });
  const bool all_neg = std::all_of(d.begin(), d.end(), [](double x) { return x < 0.0; });
  if (all_pos || all_neg) return {};

  std::vector<Vec2> pts;
  for (std::size_t i = 0; i < 8; ++i)
    if (d[i] == 0.0) pts.push_back(gap.to_plane(corners[i]));
  // 12 edges: corner pairs differing in exactly one bit.
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t bit = 1; bit < 8; bit <<= 1) {
      const std::size_t j = i | bit;
      if (j == i) continue;
      if (d[i] * d[j] < 0.0) {
        const double t = d[i] / (d[i] - d[j]);
        pts.push_back(gap.to_plane(corners[i] + t * (corners[j] - corners[i])));
      }
    }
  }
  if (pts.size() < 3) return pts;  // edge or vertex contact
  return detail::convex_hull(std::move(pts));
}

/// Exact collider-vs-gap-plane classification.
inline ClearanceResult clearance_check(const QuadrotorState& state, const GapSpec& gap,
                                       const ColliderSpec& collider) {
  const auto poly = plane_cross_section(state, gap, collider);
  if (poly.empty()) return {Clearance::Free, std::nullopt};
  if (auto bad = detail::containment_violation(gap.shape, poly))
    return {Clearance::Collision, gap.to_world(*bad)};
  return {Clearance::InPlaneSafe, std::nullopt};
}

}  // namespace gapflight
