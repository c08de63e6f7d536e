#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gapflight/math.hpp"

namespace gapflight {

// Passable region shapes, expressed in the in-plane gap coordinates (u, v):
// u is the long-edge direction (horizontal at zero roll), v completes the
// right-handed frame with the plane normal.

struct Rectangle {
  double width = 0.6;   // along u
  double height = 0.2;  // along v
};

struct Triangle {
  std::array<Vec2, 3> vertices{Vec2(-0.40, -0.18), Vec2(0.40, -0.18), Vec2(0.0, 0.36)};
};

struct Parallelogram {
  double base = 0.6;               // along u
  double side = 0.26;              // slanted edge length
  double angle = deg2rad(60.0);    // between base and side
};

struct Ellipse {
  double semi_u = 0.35;
  double semi_v = 0.14;
};

struct Diamond {
  double diagonal_u = 0.8;
  double diagonal_v = 0.32;
};

// Rectangle of `width` x `leg_height` topped by a half-disc of `radius`
// centered on the rectangle's top edge. The shape is shifted so that its
// area centroid is the origin.
struct Arch {
  double radius = 0.2;
  double leg_height = 0.2;
  double width = 0.4;
};

using GapShape = std::variant<Rectangle, Triangle, Parallelogram, Ellipse, Diamond, Arch>;

inline std::string shape_kind(const GapShape& s) {
  static constexpr std::array<const char*, 6> names{
      "rectangle", "triangle", "parallelogram", "ellipse", "diamond", "arch"};
  return names[s.index()];
}

namespace detail {

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double polygon_signed_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i)
    a += cross2(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * a;
}

inline Vec2 polygon_centroid(const std::vector<Vec2>& poly) {
  double a = 0.0;
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    const double w = cross2(p, q);
    a += w;
    c += w * (p + q);
  }
  return c / (3.0 * a);
}

// Rotates a CCW polygon so that it starts at the top-most vertex (ties:
// left-most).
inline void rotate_to_canonical_start(std::vector<Vec2>& poly) {
  auto it = std::min_element(poly.begin(), poly.end(), [](const Vec2& a, const Vec2& b) {
    if (a.y() != b.y()) return a.y() > b.y();
    return a.x() < b.x();
  });
  std::rotate(poly.begin(), it, poly.end());
}

struct ArchLayout {
  double half_width, radius, bottom, top;  // dome centered at (0, top)
};

inline ArchLayout arch_layout(const Arch& a) {
  const double rect_area = a.width * a.leg_height;
  const double disc_area = 0.5 * kPi * a.radius * a.radius;
  // With the dome center at v = c: rect centroid c - leg/2, dome centroid
  // c + 4r/(3pi). Choose c so the union centroid is 0.
  const double c = (rect_area * 0.5 * a.leg_height - disc_area * 4.0 * a.radius / (3.0 * kPi)) /
                   (rect_area + disc_area);
  return {0.5 * a.width, a.radius, c - a.leg_height, c};
}

}  // namespace detail

/// Convex CCW vertex list for polygonal shapes, starting at the canonical
/// vertex. Empty for curved shapes.
inline std::vector<Vec2> polygon_vertices(const GapShape& shape) {
  std::vector<Vec2> poly;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Rectangle>) {
          const double hw = 0.5 * s.width, hh = 0.5 * s.height;
          poly = {Vec2(-hw, hh), Vec2(-hw, -hh), Vec2(hw, -hh), Vec2(hw, hh)};
        } else if constexpr (std::is_same_v<T, Triangle>) {
          poly.assign(s.vertices.begin(), s.vertices.end());
          if (detail::polygon_signed_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
        } else if constexpr (std::is_same_v<T, Parallelogram>) {
          const Vec2 side(s.side * std::cos(s.angle), s.side * std::sin(s.angle));
          poly = {Vec2(0, 0), Vec2(s.base, 0), Vec2(s.base, 0) + side, side};
          const Vec2 c = 0.5 * (Vec2(s.base, 0) + side);
          for (auto& p : poly) p -= c;
        } else if constexpr (std::is_same_v<T, Diamond>) {
          const double a = 0.5 * s.diagonal_u, b = 0.5 * s.diagonal_v;
          poly = {Vec2(0, b), Vec2(-a, 0), Vec2(0, -b), Vec2(a, 0)};
        }
      },
      shape);
  if (!poly.empty()) detail::rotate_to_canonical_start(poly);
  return poly;
}

inline bool is_polygonal(const GapShape& s) {
  return !std::holds_alternative<Ellipse>(s) && !std::holds_alternative<Arch>(s);
}

inline void validate(const GapShape& shape) {
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  bool ok = std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Rectangle>) return positive(s.width) && positive(s.height);
        else if constexpr (std::is_same_v<T, Triangle>) {
          std::vector<Vec2> p(s.vertices.begin(), s.vertices.end());
          return std::abs(detail::polygon_signed_area(p)) > 1e-12 &&
                 s.vertices[0].allFinite() && s.vertices[1].allFinite() && s.vertices[2].allFinite();
        } else if constexpr (std::is_same_v<T, Parallelogram>)
          return positive(s.base) && positive(s.side) && s.angle > 0.0 && s.angle < kPi;
        else if constexpr (std::is_same_v<T, Ellipse>) return positive(s.semi_u) && positive(s.semi_v);
        else if constexpr (std::is_same_v<T, Diamond>)
          return positive(s.diagonal_u) && positive(s.diagonal_v);
        else
          return positive(s.radius) && positive(s.leg_height) && positive(s.width) &&
                 s.radius <= 0.5 * s.width + 1e-12;
      },
      shape);
  if (!ok) throw std::invalid_argument("invalid " + shape_kind(shape) + " gap geometry");
}

/// Closed-region membership (boundary counts as inside).
inline bool contains(const GapShape& shape, const Vec2& p) {
  return std::visit(
      [&](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Ellipse>) {
          const double x = p.x() / s.semi_u, y = p.y() / s.semi_v;
          return x * x + y * y <= 1.0;
        } else if constexpr (std::is_same_v<T, Arch>) {
          const auto L = detail::arch_layout(s);
          if (p.y() <= L.top) return std::abs(p.x()) <= L.half_width && p.y() >= L.bottom;
          const double dy = p.y() - L.top;
          return p.x() * p.x() + dy * dy <= L.radius * L.radius;
        } else if constexpr (std::is_same_v<T, Rectangle>) {
          return std::abs(p.x()) <= 0.5 * s.width && std::abs(p.y()) <= 0.5 * s.height;
        } else {
          const auto poly = polygon_vertices(shape);
          for (std::size_t i = 0; i < poly.size(); ++i) {
            const Vec2& a = poly[i];
            const Vec2& b = poly[(i + 1) % poly.size()];
            if (detail::cross2(b - a, p - a) < 0.0) return false;
          }
          return true;
        }
      },
      shape);
}

inline Vec2 shape_centroid(const GapShape& shape) {
  if (is_polygonal(shape)) return detail::polygon_centroid(polygon_vertices(shape));
  return Vec2::Zero();  // ellipse is symmetric; arch is laid out centroid-first
}

/// Uniform scaling about the origin (used for monotonicity checks).
inline GapShape scaled(const GapShape& shape, double k) {
  return std::visit(
      [&](auto s) -> GapShape {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Rectangle>) { s.width *= k; s.height *= k; }
        else if constexpr (std::is_same_v<T, Triangle>) { for (auto& v : s.vertices) v *= k; }
        else if constexpr (std::is_same_v<T, Parallelogram>) { s.base *= k; s.side *= k; }
        else if constexpr (std::is_same_v<T, Ellipse>) { s.semi_u *= k; s.semi_v *= k; }
        else if constexpr (std::is_same_v<T, Diamond>) { s.diagonal_u *= k; s.diagonal_v *= k; }
        else { s.radius *= k; s.leg_height *= k; s.width *= k; }
        return s;
      },
      shape);
}

// ---------------------------------------------------------------------------
// Boundary as a chain of pieces, used for arc-length sampling.

struct BoundaryPiece {
  enum class Kind { Line, Arc } kind = Kind::Line;
  Vec2 a = Vec2::Zero(), b = Vec2::Zero();  // line endpoints
  Vec2 center = Vec2::Zero();               // elliptic arc (a cos t, b sin t)
  double radius_u = 0.0, radius_v = 0.0, t0 = 0.0, t1 = 0.0;

  Vec2 point_at_param(double t) const {
    return center + Vec2(radius_u * std::cos(t), radius_v * std::sin(t));
  }
  double speed(double t) const {
    const double su = radius_u * std::sin(t), cv = radius_v * std::cos(t);
    return std::sqrt(su * su + cv * cv);
  }
  double arc_length(double from, double to) const {
    if (radius_u == radius_v) return radius_u * (to - from);
    if (to == from) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [this](double t) { return speed(t); }, from, to, 10, 1e-13);
  }
  double length() const {
    return kind == Kind::Line ? (b - a).norm() : arc_length(t0, t1);
  }
  // Point at arc length s from the start of the piece.
  Vec2 point_at_length(double s, double total = -1.0) const {
    if (kind == Kind::Line) {
      const double L = (b - a).norm();
      return L > 0.0 ? Vec2(a + (b - a) * (s / L)) : a;
    }
    if (radius_u == radius_v) return point_at_param(t0 + s / radius_u);
    if (total < 0.0) total = length();
    double t = t0 + (t1 - t0) * std::clamp(s / total, 0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const double err = arc_length(t0, t) - s;
      const double step = err / speed(t);
      t = std::clamp(t - step, t0, t1);
      if (std::abs(step) < 1e-14) break;
    }
    return point_at_param(t);
  }
};

/// Closed CCW boundary chain starting at the canonical point.
inline std::vector<BoundaryPiece> boundary_pieces(const GapShape& shape) {
  using K = BoundaryPiece::Kind;
  std::vector<BoundaryPiece> pieces;
  auto line = [&](const Vec2& a, const Vec2& b) {
    if ((b - a).norm() > 0.0) pieces.push_back({K::Line, a, b});
  };
  auto arc = [&](const Vec2& c, double ru, double rv, double t0, double t1) {
    BoundaryPiece p;
    p.kind = K::Arc;
    p.center = c;
    p.radius_u = ru;
    p.radius_v = rv;
    p.t0 = t0;
    p.t1 = t1;
    pieces.push_back(p);
  };

  if (is_polygonal(shape)) {
    const auto poly = polygon_vertices(shape);
    for (std::size_t i = 0; i < poly.size(); ++i) line(poly[i], poly[(i + 1) % poly.size()]);
  } else if (const auto* e = std::get_if<Ellipse>(&shape)) {
    arc(Vec2::Zero(), e->semi_u, e->semi_v, 0.5 * kPi, 2.5 * kPi);
  } else {
    const auto L = detail::arch_layout(std::get<Arch>(shape));
    const Vec2 c(0.0, L.top);
    arc(c, L.radius, L.radius, 0.5 * kPi, kPi);
    line(Vec2(-L.radius, L.top), Vec2(-L.half_width, L.top));
    line(Vec2(-L.half_width, L.top), Vec2(-L.half_width, L.bottom));
    line(Vec2(-L.half_width, L.bottom), Vec2(L.half_width, L.bottom));
    line(Vec2(L.half_width, L.bottom), Vec2(L.half_width, L.top));
    line(Vec2(L.half_width, L.top), Vec2(L.radius, L.top));
    arc(c, L.radius, L.radius, 0.0, 0.5 * kPi);
  }
  return pieces;
}

inline double perimeter(const GapShape& shape) {
  double total = 0.0;
  for (const auto& p : boundary_pieces(shape)) total += p.length();
  return total;
}

/// `n` points at equal arc-length spacing along the boundary in gap-plane
/// coordinates, counterclockwise from the canonical start point.
inline std::vector<Vec2> sample_boundary(const GapShape& shape, int n) {
  if (n < 3) throw std::invalid_argument("sample_boundary: need n >= 3");
  const auto pieces = boundary_pieces(shape);
  std::vector<double> lengths;
  double total = 0.0;
  for (const auto& p : pieces) {
    lengths.push_back(p.length());
    total += lengths.back();
  }
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(n));
  std::size_t piece = 0;
  double piece_start = 0.0;
  for (int k = 0; k < n; ++k) {
    const double s = total * k / n;
    while (piece + 1 < pieces.size() && s >= piece_start + lengths[piece]) {
      piece_start += lengths[piece];
      ++piece;
    }
    out.push_back(pieces[piece].point_at_length(s - piece_start, lengths[piece]));
  }
  return out;
}

// ---------------------------------------------------------------------------

/// A gap: a planar passable region placed in the world. `frame` maps the
/// gap frame (X = plane normal pointing in the traversal direction, Y = u,
/// Z = v) to the world.
struct GapSpec {
  Vec3 center = Vec3(0.0, 0.0, 1.5);
  Quat frame = Quat::Identity();
  GapShape shape = Rectangle{};

  /// Frame from a normal and a roll about it. Zero roll puts u horizontal.
  static GapSpec from_normal_roll(const Vec3& center, const Vec3& normal, double roll,
                                  GapShape shape) {
    if (!normal.allFinite() || normal.norm() < 1e-12)
      throw std::invalid_argument("GapSpec: normal must be non-zero");
    const Vec3 n = normal.normalized();
    Vec3 y0 = Vec3::UnitZ().cross(n);
    if (y0.norm() < 1e-9) y0 = n.cross(Vec3::UnitX());
    y0.normalize();
    const Vec3 z0 = n.cross(y0);
    const Vec3 y = std::cos(roll) * y0 + std::sin(roll) * z0;
    const Vec3 z = n.cross(y);
    Mat3 R;
    R.col(0) = n;
    R.col(1) = y;
    R.col(2) = z;
    GapSpec g;
    g.center = center;
    g.frame = Quat(R).normalized();
    g.shape = std::move(shape);
    return g;
  }

  Vec3 normal() const { return frame * Vec3::UnitX(); }
  Vec3 axis_u() const { return frame * Vec3::UnitY(); }
  Vec3 axis_v() const { return frame * Vec3::UnitZ(); }

  /// Roll of the u axis about the normal, relative to horizontal.
  double roll() const {
    const Vec3 n = normal();
    Vec3 y0 = Vec3::UnitZ().cross(n);
    if (y0.norm() < 1e-9) y0 = n.cross(Vec3::UnitX());
    y0.normalize();
    const Vec3 z0 = n.cross(y0);
    const Vec3 u = axis_u();
    return std::atan2(u.dot(z0), u.dot(y0));
  }

  /// Pitch a vehicle needs for its body x to lie along the normal.
  double pitch() const { return -std::asin(std::clamp(normal().z(), -1.0, 1.0)); }
  /// Yaw of the normal's horizontal projection.
  double yaw() const { return std::atan2(normal().y(), normal().x()); }

  Vec3 to_local(const Vec3& world) const { return frame.conjugate() * (world - center); }
  Vec2 to_plane(const Vec3& world) const {
    const Vec3 l = to_local(world);
    return {l.y(), l.z()};
  }
  Vec3 to_world(const Vec2& uv) const {
    return center + frame * Vec3(0.0, uv.x(), uv.y());
  }

  /// Geometric center of the passable region (world).
  Vec3 passable_center() const { return to_world(shape_centroid(shape)); }

  GapSpec transformed(const Quat& R, const Vec3& t) const {
    GapSpec g = *this;
    g.center = R * center + t;
    g.frame = (R * frame).normalized();
    return g;
  }
};

/// World-frame edge samples of a gap.
inline std::vector<Vec3> sample_edge_points(const GapSpec& gap, int n) {
  std::vector<Vec3> out;
  for (const Vec2& uv : sample_boundary(gap.shape, n)) out.push_back(gap.to_world(uv));
  return out;
}

}  // namespace gapflight
