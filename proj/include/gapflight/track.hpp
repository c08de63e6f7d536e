#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gapflight/geometry.hpp"

namespace gapflight {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  static Interval point(double x) { return {x, x}; }
  // Normalizes the order, e.g. for ranges written high-to-low.
  static Interval between(double a, double b) { return {std::min(a, b), std::max(a, b)}; }

  bool valid() const { return std::isfinite(lo) && std::isfinite(hi) && lo <= hi; }
  bool contains(double x) const { return x >= lo && x <= hi; }
  double sample(Rng& rng) const { return rng.uniform(lo, hi); }
  double mid() const { return 0.5 * (lo + hi); }
};

struct Box3 {
  Interval x, y, z;

  bool valid() const { return x.valid() && y.valid() && z.valid(); }
  Vec3 sample(Rng& rng) const { return {x.sample(rng), y.sample(rng), z.sample(rng)}; }
};

/// One gap of a track with its per-episode randomization ranges.
struct TrackGap {
  GapShape shape = Rectangle{};
  Vec3 normal = Vec3::UnitX();
  Box3 position{Interval::point(0.0), Interval::point(0.0), Interval::point(1.5)};
  Interval roll = Interval::point(0.0);
};

struct TrackConfig {
  std::string name = "custom";
  std::vector<TrackGap> gaps;
  // Hover-start region, expressed in the first gap's frame for x and y
  // (x along the normal, y along the horizontal in-plane axis) and as
  // absolute world height for z.
  Box3 start_region{{-4.5, -2.0}, {-3.0, 3.0}, {1.0, 2.0}};
  // Success once the center is this far past the last gap plane.
  double exit_margin = 0.5;

  void validate() const {
    if (gaps.empty()) throw std::invalid_argument("track '" + name + "': no gaps");
    if (!start_region.valid()) throw std::invalid_argument("track '" + name + "': bad start region");
    if (!(exit_margin > 0.0)) throw std::invalid_argument("track '" + name + "': bad exit margin");
    const Vec3 n0 = gaps.front().normal.normalized();
    for (std::size_t i = 0; i < gaps.size(); ++i) {
      const auto& g = gaps[i];
      const std::string where = "track '" + name + "' gap " + std::to_string(i + 1);
      if (!g.position.valid() || !g.roll.valid())
        throw std::invalid_argument(where + ": empty randomization range");
      if (!g.normal.allFinite() || g.normal.norm() < 1e-9)
        throw std::invalid_argument(where + ": invalid normal");
      if (g.normal.normalized().cross(n0).norm() > 1e-9)
        throw std::invalid_argument(where + ": gap planes must be parallel");
      validate_shape(g.shape, where);
    }
  }

 private:
  static void validate_shape(const GapShape& s, const std::string& where) {
    try {
      gapflight::validate(s);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + ": " + e.what());
    }
  }
};

inline GapSpec sample_gap(const TrackGap& g, Rng& rng) {
  const Vec3 p = g.position.sample(rng);
  const double roll = g.roll.sample(rng);
  return GapSpec::from_normal_roll(p, g.normal, roll, g.shape);
}

inline GapSpec nominal_gap(const TrackGap& g) {
  return GapSpec::from_normal_roll(
      Vec3(g.position.x.mid(), g.position.y.mid(), g.position.z.mid()), g.normal, g.roll.mid(),
      g.shape);
}

/// Draws every gap's position and roll uniformly from its ranges.
inline std::vector<GapSpec> randomize_track(const TrackConfig& track, Rng& rng) {
  std::vector<GapSpec> out;
  out.reserve(track.gaps.size());
  for (const auto& g : track.gaps) out.push_back(sample_gap(g, rng));
  return out;
}

namespace presets {

inline TrackGap rect_gap(Interval x, Interval y, Interval z, Interval roll,
                         Rectangle r = Rectangle{0.6, 0.2}) {
  TrackGap g;
  g.shape = r;
  g.position = {x, y, z};
  g.roll = roll;
  return g;
}

inline TrackGap fixed_first(double roll_a, double roll_b) {
  return rect_gap(Interval::point(0.0), Interval::point(0.0), Interval::point(1.5),
                  Interval::between(roll_a, roll_b));
}

// Consecutive-gap tracks, 60 x 20 cm rectangles with parallel planes.
inline TrackConfig consecutive_track(int index) {
  using I = Interval;
  const double pi = kPi;
  TrackConfig t;
  t.name = "track" + std::to_string(index);
  switch (index) {
    case 1:
      t.gaps = {fixed_first(pi / 4.3, pi / 3.7),
                rect_gap(I::between(0.80, 0.90), I::between(-0.05, 0.05), I::between(1.45, 1.55),
                         I::between(pi / 7, pi / 6))};
      break;
    case 2:
      t.gaps = {fixed_first(pi / 3.3, pi / 2.7),
                rect_gap(I::between(0.85, 0.95), I::between(-0.10, 0.00), I::between(1.35, 1.45),
                         I::between(pi / 6.5, pi / 5.5))};
      break;
    case 3:
      t.gaps = {fixed_first(pi / 4.3, pi / 3.7),
                rect_gap(I::between(1.30, 1.40), I::between(-0.75, -0.65), I::between(1.45, 1.55),
                         I::between(-pi / 5.8, -pi / 6.2))};
      break;
    case 4:
      t.gaps = {fixed_first(pi / 4, pi / 3.5),
                rect_gap(I::between(1.00, 1.10), I::between(-0.10, 0.00), I::between(1.35, 1.45),
                         I::between(-pi / 18, -pi / 36)),
                rect_gap(I::between(1.80, 1.85), I::between(0.00, 0.05), I::between(1.35, 1.40),
                         I::between(-pi / 3.7, -pi / 4.3))};
      break;
    case 5:
      t.gaps = {fixed_first(pi / 4.3, pi / 3.7),
                rect_gap(I::between(1.3, 1.4), I::between(-0.70, -0.60), I::between(1.40, 1.45),
                         I::between(-pi / 5.8, -pi / 6.2)),
                rect_gap(I::between(2.7, 2.8), I::between(-0.05, 0.05), I::between(1.45, 1.55),
                         I::between(pi / 4.3, pi / 3.7))};
      break;
    case 6:
      t.gaps = {fixed_first(pi / 6.2, pi / 5.8),
                rect_gap(I::between(0.9, 0.95), I::between(-0.45, -0.40), I::between(1.45, 1.55),
                         I::between(-pi / 5.8, -pi / 6.2)),
                rect_gap(I::between(1.75, 1.8), I::between(-0.05, 0.00), I::between(1.45, 1.55),
                         I::between(pi / 6.2, pi / 5.8))};
      break;
    default:
      throw std::invalid_argument("unknown track index " + std::to_string(index));
  }
  return t;
}

inline TrackConfig single_gap(std::string name, GapShape shape, Interval roll) {
  TrackConfig t;
  t.name = std::move(name);
  TrackGap g;
  g.shape = std::move(shape);
  g.roll = roll;
  t.gaps = {g};
  return t;
}

inline const std::vector<std::string>& track_names() {
  static const std::vector<std::string> names{
      "track1", "track2", "track3", "track4", "track5", "track6",
      "single_rect", "easy_rect", "single_triangle", "single_parallelogram",
      "single_ellipse", "single_diamond", "single_arch"};
  return names;
}

/// Bundled track presets by name.
inline TrackConfig track(const std::string& name) {
  for (int i = 1; i <= 6; ++i)
    if (name == "track" + std::to_string(i)) return consecutive_track(i);
  const Interval any_roll = Interval::between(-kPi / 2, kPi / 2);
  if (name == "single_rect") return single_gap(name, Rectangle{0.6, 0.2}, any_roll);
  if (name == "easy_rect") return single_gap(name, Rectangle{0.6, 0.4}, Interval::point(0.0));
  if (name == "single_triangle") return single_gap(name, Triangle{}, any_roll);
  if (name == "single_parallelogram") return single_gap(name, Parallelogram{}, any_roll);
  if (name == "single_ellipse") return single_gap(name, Ellipse{}, any_roll);
  if (name == "single_diamond") return single_gap(name, Diamond{}, any_roll);
  if (name == "single_arch") return single_gap(name, Arch{}, any_roll);
  throw std::invalid_argument("unknown track preset '" + name + "'");
}

}  // namespace presets
}  // namespace gapflight
