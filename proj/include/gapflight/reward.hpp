#pragma once

#include <array>
#include <string>

#include "gapflight/clearance.hpp"
#include "gapflight/sensing.hpp"

namespace gapflight {

enum class RewardMode { Rolled, Pitched };

struct RewardConfig {
  RewardMode mode = RewardMode::Rolled;
  double traverse_weight = 10.0;
  double traverse_band = 0.2;  // l^C, m
  double pitch_scale = deg2rad(20.0);  // pitched-mode traverse weight decay
  double shaping_weight = 0.3;
  std::array<double, 4> magnitude_weights{0.04, 0.05, 0.04, 0.02};
  std::array<double, 4> variation_weights{0.06, 0.015, 0.01, 0.00};
  double speed_weight = 0.05;
  double speed_limit = 4.0;  // m/s
  double distill_weight = 0.15;
  double approach_distance = 0.6;  // m
  double velocity_weight = 0.375;
  double pitch_weight = 0.25;
  double yaw_weight = 0.5;

  static RewardConfig rolled() { return {}; }

  static RewardConfig pitched() {
    RewardConfig c;
    c.mode = RewardMode::Pitched;
    c.distill_weight = 0.10;
    c.velocity_weight *= 0.8;
    c.pitch_weight *= 0.8;
    c.yaw_weight *= 0.8;
    return c;
  }

  static RewardConfig for_mode(RewardMode m) {
    return m == RewardMode::Rolled ? rolled() : pitched();
  }
};

struct RewardBreakdown {
  double traversing = 0.0;
  double shaping = 0.0;
  double smoothness = 0.0;
  double speed = 0.0;
  double distillation_reg = 0.0;
  double approach_reg = 0.0;
  double total = 0.0;

  void finalize() {
    total = traversing + shaping + smoothness + speed + distillation_reg + approach_reg;
  }
};

/// Progress through the +-l^C band around the plane. A step earns reward
/// when its x^g interval overlaps the band and the collider is not in
/// collision; both endpoints are clipped to the band, so a collision-free
/// pass telescopes to weight * 2 l^C.
inline double traversing_reward(double prev_xg, double xg, Clearance clearance, double pitch,
                                double gap_pitch, const RewardConfig& cfg) {
  const double l = cfg.traverse_band;
  const double lo = std::min(prev_xg, xg), hi = std::max(prev_xg, xg);
  const bool overlaps = hi >= -l && lo <= l;
  if (!overlaps || clearance == Clearance::Collision) return 0.0;
  double weight = cfg.traverse_weight;
  if (cfg.mode == RewardMode::Pitched)
    weight *= std::exp(-std::abs(pitch - gap_pitch) / cfg.pitch_scale);
  return weight * (std::clamp(xg, -l, l) - std::clamp(prev_xg, -l, l));
}

inline double shaping_reward(const Vec3& prev_p, const Vec3& p, const Vec3& passable_center,
                             double xg, const RewardConfig& cfg) {
  if (!(xg < 0.0)) return 0.0;
  return cfg.shaping_weight * ((prev_p - passable_center).norm() - (p - passable_center).norm());
}

struct SmoothnessSpeed {
  double smoothness = 0.0;
  double speed = 0.0;
};

inline SmoothnessSpeed smoothness_and_speed(const CommandSetpoint& action,
                                            const CommandSetpoint& prev_action,
                                            const Vec3& velocity, const RewardConfig& cfg) {
  const auto a = action.channels();
  const auto b = prev_action.channels();
  SmoothnessSpeed out;
  for (std::size_t i = 0; i < 4; ++i)
    out.smoothness -= cfg.magnitude_weights[i] * std::abs(a[i]) +
                      cfg.variation_weights[i] * std::abs(a[i] - b[i]);
  const double speed = velocity.norm();
  if (speed <= cfg.speed_limit)
    out.speed = cfg.speed_weight * (1.0 - std::exp(speed - cfg.speed_limit));
  return out;
}

struct AlignmentInputs {
  Vec3 prev_body_x, body_x;          // unit body x-axis (world)
  Vec3 prev_gap_dir, gap_dir;        // unit direction vehicle -> gap center
  Vec3 prev_velocity, velocity;      // world
  Vec3 gap_normal;                   // unit +X^g
  double pitch = 0.0, gap_pitch = 0.0;
  double yaw = 0.0, gap_yaw = 0.0;
  double xg = 0.0;
};

struct AlignmentRewards {
  double distillation_reg = 0.0;
  double approach_reg = 0.0;
};

/// Far from the plane: reward turning the camera axis toward the gap.
/// Near and through it: reward normal velocity, penalize pitch/yaw error.
inline AlignmentRewards alignment_rewards(const AlignmentInputs& in, const RewardConfig& cfg) {
  AlignmentRewards out;
  if (in.xg < -cfg.approach_distance) {
    out.distillation_reg =
        cfg.distill_weight * (in.body_x.dot(in.gap_dir) - in.prev_body_x.dot(in.prev_gap_dir));
  } else {
    // <v_b, n^g> with n^g expressed in the body frame equals the world dot.
    const double dv = in.velocity.dot(in.gap_normal) - in.prev_velocity.dot(in.gap_normal);
    out.approach_reg = cfg.velocity_weight * dv -
                       cfg.pitch_weight * std::abs(wrap_angle(in.pitch - in.gap_pitch)) -
                       cfg.yaw_weight * std::abs(wrap_angle(in.yaw - in.gap_yaw));
  }
  return out;
}

/// Everything needed to score one control step.
struct TransitionSnapshot {
  QuadrotorState prev_state;
  QuadrotorState state;
  CommandSetpoint prev_action;
  CommandSetpoint action;
  GapSpec gap;
  Clearance clearance = Clearance::Free;  // at `state`
};

inline Vec3 body_x_axis(const QuadrotorState& s) { return s.attitude * Vec3::UnitX(); }

inline Vec3 direction_to(const Vec3& from, const Vec3& to) {
  const Vec3 d = to - from;
  const double n = d.norm();
  return n > 0.0 ? Vec3(d / n) : Vec3::Zero();
}

inline RewardBreakdown compute_reward(const TransitionSnapshot& s, const RewardConfig& cfg) {
  RewardBreakdown r;
  const double prev_xg = gap_coordinate(s.prev_state, s.gap);
  const double xg = gap_coordinate(s.state, s.gap);
  const auto [roll, pitch] = roll_pitch(s.state.attitude);
  (void)roll;
  const Vec3 center = s.gap.passable_center();

  r.traversing = traversing_reward(prev_xg, xg, s.clearance, pitch, s.gap.pitch(), cfg);
  r.shaping = shaping_reward(s.prev_state.position, s.state.position, center, xg, cfg);
  const auto ss = smoothness_and_speed(s.action, s.prev_action, s.state.velocity, cfg);
  r.smoothness = ss.smoothness;
  r.speed = ss.speed;

  AlignmentInputs in;
  in.prev_body_x = body_x_axis(s.prev_state);
  in.body_x = body_x_axis(s.state);
  in.prev_gap_dir = direction_to(s.prev_state.position, center);
  in.gap_dir = direction_to(s.state.position, center);
  in.prev_velocity = s.prev_state.velocity;
  in.velocity = s.state.velocity;
  in.gap_normal = s.gap.normal();
  in.pitch = pitch;
  in.gap_pitch = s.gap.pitch();
  in.yaw = yaw_of(s.state.attitude);
  in.gap_yaw = s.gap.yaw();
  in.xg = xg;
  const auto al = alignment_rewards(in, cfg);
  r.distillation_reg = al.distillation_reg;
  r.approach_reg = al.approach_reg;
  r.finalize();
  return r;
}

}  // namespace gapflight
