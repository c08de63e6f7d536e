#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>

#include "gapflight/math.hpp"

namespace gapflight {

/// One axis of a minimum-jerk quintic, p(t) = sum_i c[i] t^i on [0, T].
struct AxisTrajectory {
  std::array<double, 6> c{};
  double duration = 0.0;

  double position(double t) const {
    return c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
  }
  double velocity(double t) const {
    return c[1] + t * (2 * c[2] + t * (3 * c[3] + t * (4 * c[4] + t * 5 * c[5])));
  }
  double acceleration(double t) const {
    return 2 * c[2] + t * (6 * c[3] + t * (12 * c[4] + t * 20 * c[5]));
  }
  double jerk(double t) const { return 6 * c[3] + t * (24 * c[4] + t * 60 * c[5]); }
};

/// Closed-form rest-of-state minimum-jerk axis (Mueller et al.).
inline AxisTrajectory min_jerk_axis(double p0, double v0, double a0, double pf, double vf,
                                    double af, double T) {
  if (!(T > 0.0) || !std::isfinite(T))
    throw std::invalid_argument("min_jerk: duration must be positive and finite");
  const double dp = pf - (p0 + v0 * T + 0.5 * a0 * T * T);
  const double dv = vf - (v0 + a0 * T);
  const double da = af - a0;
  const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
  const double alpha = (720 * dp - 360 * T * dv + 60 * T2 * da) / T5;
  const double beta = (-360 * T * dp + 168 * T2 * dv - 24 * T3 * da) / T5;
  const double gamma = (60 * T2 * dp - 24 * T3 * dv + 3 * T4 * da) / T5;
  AxisTrajectory a;
  a.c = {p0, v0, 0.5 * a0, gamma / 6.0, beta / 24.0, alpha / 120.0};
  a.duration = T;
  return a;
}

struct KinematicState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
};

struct MinJerkTrajectory {
  std::array<AxisTrajectory, 3> axes;
  double duration = 0.0;

  Vec3 position(double t) const {
    return {axes[0].position(t), axes[1].position(t), axes[2].position(t)};
  }
  Vec3 velocity(double t) const {
    return {axes[0].velocity(t), axes[1].velocity(t), axes[2].velocity(t)};
  }
  Vec3 acceleration(double t) const {
    return {axes[0].acceleration(t), axes[1].acceleration(t), axes[2].acceleration(t)};
  }
  Vec3 jerk(double t) const { return {axes[0].jerk(t), axes[1].jerk(t), axes[2].jerk(t)}; }

  KinematicState state(double t) const { return {position(t), velocity(t), acceleration(t)}; }
};

inline MinJerkTrajectory min_jerk_trajectory(const KinematicState& init,
                                             const KinematicState& final_state, double T) {
  MinJerkTrajectory out;
  for (int i = 0; i < 3; ++i)
    out.axes[static_cast<std::size_t>(i)] =
        min_jerk_axis(init.position[i], init.velocity[i], init.acceleration[i],
                      final_state.position[i], final_state.velocity[i],
                      final_state.acceleration[i], T);
  out.duration = T;
  return out;
}

struct FeasibilityLimits {
  double thrust_min = 0.41 * kGravity;  // m/s^2
  double thrust_max = 2.04 * kGravity;
  double bodyrate_max = 8.0;  // rad/s
  double sample_dt = 0.01;    // s
};

/// Thrust and tilt-rate bounds checked at uniformly spaced samples,
/// including both endpoints.
inline bool feasibility_check(const MinJerkTrajectory& traj, const FeasibilityLimits& lim) {
  if (!(lim.sample_dt > 0.0)) throw std::invalid_argument("feasibility: sample_dt must be > 0");
  const auto steps = static_cast<long>(std::ceil(traj.duration / lim.sample_dt));
  const Vec3 g = gravity_vector();
  for (long k = 0; k <= steps; ++k) {
    const double t = std::min(traj.duration, k * lim.sample_dt);
    const Vec3 f = traj.acceleration(t) - g;
    const double thrust = f.norm();
    if (thrust < lim.thrust_min || thrust > lim.thrust_max) return false;
    const Vec3 z = f / thrust;
    const double rate = z.cross(traj.jerk(t)).norm() / thrust;
    if (rate > lim.bodyrate_max) return false;
  }
  return true;
}

struct TimeSampling {
  double alpha_min = 0.5;
  double alpha_max = 2.0;
  double resolution = 0.05;

  int count() const {
    return static_cast<int>(std::floor((alpha_max - alpha_min) / resolution + 1e-9)) + 1;
  }
  double alpha(int i) const { return alpha_min + i * resolution; }
};

/// First feasible execution time in the increasing grid alpha * t_guess.
inline std::optional<double> sample_execution_time(double t_guess,
                                                   const std::function<bool(double)>& feasible,
                                                   const TimeSampling& grid = {}) {
  if (!(t_guess > 0.0)) throw std::invalid_argument("sample_execution_time: t_guess must be > 0");
  for (int i = 0; i < grid.count(); ++i) {
    const double T = grid.alpha(i) * t_guess;
    if (feasible(T)) return T;
  }
  return std::nullopt;
}

}  // namespace gapflight
