#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gapflight/dynamics.hpp"
#include "gapflight/geometry.hpp"

namespace gapflight {

/// Pinhole camera looking along body +x (image right = body -y, image down
/// = body -z), centered on the vehicle.
struct CameraModel {
  double hfov_deg = 82.0;
  double vfov_deg = 72.0;
  int width = 320;
  int height = 256;
  double focal_scale = 1.0;  // per-episode intrinsics randomization
  double max_range = 10.0;   // rays hitting beyond this are background
  double frame_border = 0.05;  // visible frame material around the region

  static CameraModel baseline() {
    CameraModel c;
    c.hfov_deg = 120.0;
    c.vfov_deg = 120.0;
    c.width = 512;
    c.height = 512;
    return c;
  }

  void validate() const {
    if (!(hfov_deg > 0.0 && hfov_deg < 180.0 && vfov_deg > 0.0 && vfov_deg < 180.0))
      throw std::invalid_argument("camera: field of view must be in (0, 180) degrees");
    if (width <= 0 || height <= 0) throw std::invalid_argument("camera: resolution must be positive");
    if (!(focal_scale > 0.0)) throw std::invalid_argument("camera: focal scale must be positive");
    if (!(frame_border > 0.0)) throw std::invalid_argument("camera: frame border must be positive");
  }

  double fx() const { return focal_scale * 0.5 * width / std::tan(0.5 * deg2rad(hfov_deg)); }
  double fy() const { return focal_scale * 0.5 * height / std::tan(0.5 * deg2rad(vfov_deg)); }
  double cx() const { return 0.5 * width; }
  double cy() const { return 0.5 * height; }

  /// Body-frame ray through continuous pixel coordinates (col, row).
  Vec3 body_ray(double col, double row) const {
    const double xc = (col - cx()) / fx();
    const double yc = (row - cy()) / fy();
    return Vec3(1.0, -xc, -yc);
  }

  /// Continuous pixel coordinates (col, row) of a body-frame point in front
  /// of the camera; nullopt when behind.
  std::optional<Vec2> project_body(const Vec3& pb) const {
    if (!(pb.x() > 0.0)) return std::nullopt;
    const double xc = -pb.y() / pb.x();
    const double yc = -pb.z() / pb.x();
    return Vec2(fx() * xc + cx(), fy() * yc + cy());
  }
};

struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, values 0 or 1

  BinaryImage() = default;
  BinaryImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
  }
  bool empty_mask() const { return count() == 0; }

  bool operator==(const BinaryImage&) const = default;
};

/// Binary PGM (P5) with 0/255 values.
inline void write_pgm(std::ostream& out, const BinaryImage& img) {
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  for (std::uint8_t p : img.pixels) out.put(p ? static_cast<char>(255) : 0);
}

inline void write_pgm(const std::string& path, const BinaryImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  write_pgm(f, img);
}

/// ZYX Euler roll and pitch.
inline std::pair<double, double> roll_pitch(const Quat& q) {
  const double roll = std::atan2(2.0 * (q.w() * q.x() + q.y() * q.z()),
                                 1.0 - 2.0 * (q.x() * q.x() + q.y() * q.y()));
  const double s = std::clamp(2.0 * (q.w() * q.y() - q.z() * q.x()), -1.0, 1.0);
  return {roll, std::asin(s)};
}

/// Gap edge samples expressed in the body frame.
inline std::vector<Vec3> observe_gap_points(const QuadrotorState& state, const GapSpec& gap,
                                            int n) {
  const Quat inv = state.attitude.conjugate();
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  for (const Vec3& p : sample_edge_points(gap, n)) out.push_back(inv * (p - state.position));
  return out;
}

namespace detail {

// Outward miter offset of a convex CCW polygon.
inline std::vector<Vec2> miter_offset(const std::vector<Vec2>& poly, double d) {
  const std::size_t n = poly.size();
  std::vector<Vec2> out(n);
  auto outward = [&](std::size_t i) {
    const Vec2 e = (poly[(i + 1) % n] - poly[i]).normalized();
    return Vec2(e.y(), -e.x());
  };
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = outward((i + n - 1) % n);
    const Vec2 b = outward(i);
    out[i] = poly[i] + d * (a + b) / (1.0 + a.dot(b));
  }
  return out;
}

// Moller-Trumbore; returns the ray parameter on hit.
inline std::optional<double> ray_triangle(const Vec3& o, const Vec3& dir, const Vec3& a,
                                          const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pv = dir.cross(e2);
  const double det = e1.dot(pv);
  if (std::abs(det) < 1e-14) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 tv = o - a;
  const double u = tv.dot(pv) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 qv = tv.cross(e1);
  const double v = dir.dot(qv) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(qv) * inv;
  if (t <= 0.0) return std::nullopt;
  return t;
}

inline bool in_outer_curved(const GapShape& shape, const Vec2& p, double border) {
  if (const auto* e = std::get_if<Ellipse>(&shape)) {
    const double x = p.x() / (e->semi_u + border), y = p.y() / (e->semi_v + border);
    return x * x + y * y <= 1.0;
  }
  const auto L = arch_layout(std::get<Arch>(shape));
  if (p.y() <= L.top) return std::abs(p.x()) <= L.half_width + border && p.y() >= L.bottom - border;
  const double dy = p.y() - L.top;
  const double r = L.radius + border;
  return p.x() * p.x() + dy * dy <= r * r;
}

}  // namespace detail

/// Triangles (world frame) covering the frame annulus of a polygonal gap.
inline std::vector<std::array<Vec3, 3>> frame_triangles(const GapSpec& gap, double border) {
  const auto inner = polygon_vertices(gap.shape);
  const auto outer = detail::miter_offset(inner, border);
  std::vector<std::array<Vec3, 3>> tris;
  const std::size_t n = inner.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    const Vec3 pi = gap.to_world(inner[i]), pj = gap.to_world(inner[j]);
    const Vec3 qi = gap.to_world(outer[i]), qj = gap.to_world(outer[j]);
    tris.push_back({pi, pj, qj});
    tris.push_back({pi, qj, qi});
  }
  return tris;
}

/// Outer frame corners (gap-plane coordinates) for polygonal gaps.
inline std::vector<Vec2> frame_outer_polygon(const GapShape& shape, double border) {
  return detail::miter_offset(polygon_vertices(shape), border);
}

/// Binary mask of the gap frame as seen by the camera. Polygonal gaps are
/// ray cast against the triangulated frame; curved gaps intersect the
/// plane and test the implicit region equations.
inline BinaryImage render_mask(const QuadrotorState& state, const GapSpec& gap,
                               const CameraModel& camera) {
  BinaryImage img(camera.width, camera.height, 0);
  const Mat3 R = state.rotation();
  const Vec3 origin = state.position;
  const Vec3 n = gap.normal();
  const bool polygonal = is_polygonal(gap.shape);

  std::vector<std::array<Vec3, 3>> tris;
  double reach = 0.0;  // bound on distance of frame points from the gap center
  if (polygonal) {
    tris = frame_triangles(gap, camera.frame_border);
    for (const auto& t : tris)
      for (const auto& v : t) reach = std::max(reach, (v - gap.center).norm());
  } else {
    for (const auto& p : sample_boundary(gap.shape, 64)) reach = std::max(reach, p.norm());
    reach += 2.0 * camera.frame_border + 0.05;
  }

  for (int row = 0; row < camera.height; ++row) {
    for (int col = 0; col < camera.width; ++col) {
      const Vec3 dir = (R * camera.body_ray(col + 0.5, row + 0.5)).normalized();
      const double denom = n.dot(dir);
      if (std::abs(denom) < 1e-12) continue;
      const double t_plane = n.dot(gap.center - origin) / denom;
      if (t_plane <= 0.0 || t_plane >= camera.max_range) continue;
      const Vec3 hit = origin + t_plane * dir;
      if ((hit - gap.center).norm() > reach + 1e-9) continue;

      bool on = false;
      if (polygonal) {
        for (const auto& t : tris) {
          if (auto d = detail::ray_triangle(origin, dir, t[0], t[1], t[2]);
              d && *d < camera.max_range) {
            on = true;
            break;
          }
        }
      } else {
        const Vec2 uv = gap.to_plane(hit);
        on = detail::in_outer_curved(gap.shape, uv, camera.frame_border) && !contains(gap.shape, uv);
      }
      if (on) img.at(row, col) = 1;
    }
  }
  return img;
}

/// Block max/min edge noise: each `block` x `block` square becomes its max
/// or its min with equal probability.
inline BinaryImage randomize_mask(const BinaryImage& image, int block, Rng& rng) {
  if (block < 1 || image.width % block != 0 || image.height % block != 0)
    throw std::invalid_argument("randomize_mask: resolution not divisible by block size");
  BinaryImage out = image;
  for (int r0 = 0; r0 < image.height; r0 += block) {
    for (int c0 = 0; c0 < image.width; c0 += block) {
      const bool take_max = rng.bernoulli(0.5);
      std::uint8_t v = take_max ? 0 : 1;
      for (int r = r0; r < r0 + block; ++r)
        for (int c = c0; c < c0 + block; ++c)
          v = take_max ? std::max(v, image.at(r, c)) : std::min(v, image.at(r, c));
      for (int r = r0; r < r0 + block; ++r)
        for (int c = c0; c < c0 + block; ++c) out.at(r, c) = v;
    }
  }
  return out;
}

inline int sample_mask_block(Rng& rng) { return rng.bernoulli(0.5) ? 2 : 4; }

struct LatencyModel {
  int image_delay = 0;      // steps
  int inference_delay = 0;  // steps

  int total() const { return image_delay + inference_delay; }
  bool valid() const { return image_delay >= 0 && inference_delay >= 0; }
};

/// Fixed delay line; before `delay` pushes have happened it keeps returning
/// the reset value.
template <typename T>
class DelayLine {
 public:
  DelayLine() = default;
  DelayLine(int delay, T reset_value) { reset(delay, std::move(reset_value)); }

  void reset(int delay, T reset_value) {
    if (delay < 0) throw std::invalid_argument("DelayLine: negative delay");
    buffer_.assign(static_cast<std::size_t>(delay), std::move(reset_value));
  }

  /// Pushes the newest value and returns the one from `delay` pushes ago.
  T push(T value) {
    buffer_.push_back(std::move(value));
    T out = std::move(buffer_.front());
    buffer_.pop_front();
    return out;
  }

  std::size_t delay() const { return buffer_.size(); }

 private:
  std::deque<T> buffer_;
};

struct ObservationBundle {
  std::vector<Vec3> gap_points;     // body frame; points channel
  std::optional<BinaryImage> mask;  // mask channel
  double roll = 0.0;
  double pitch = 0.0;
  CommandSetpoint previous_action;
  Vec3 body_velocity = Vec3::Zero();  // privileged
  std::int64_t timestamp = 0;         // control step at capture
  int observed_gap = 0;
};

/// Pushes the current observation and returns the one captured
/// (image + inference) steps ago, or the reset observation during warm-up.
inline ObservationBundle delayed_observation(DelayLine<ObservationBundle>& queue,
                                             ObservationBundle current) {
  return queue.push(std::move(current));
}

}  // namespace gapflight
