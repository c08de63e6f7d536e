#pragma once

#include "gapflight/dynamics.hpp"
#include "gapflight/planner.hpp"

namespace gapflight {

struct TrackingReference {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  Vec3 jerk = Vec3::Zero();
  double yaw = 0.0;
};

struct TrackingGains {
  Vec3 kp{10.0, 10.0, 13.0};
  Vec3 kd{5.7, 5.7, 6.5};
  double k_attitude = 8.0;
  double k_yaw = 3.0;
};

inline Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

/// Desired body frame for a thrust direction and a heading.
inline Mat3 desired_rotation(const Vec3& z_des, double yaw) {
  const Vec3 x_c(std::cos(yaw), std::sin(yaw), 0.0);
  Vec3 y = z_des.cross(x_c);
  if (y.norm() < 1e-6) y = z_des.cross(Vec3::UnitX());
  y.normalize();
  Mat3 R;
  R.col(0) = y.cross(z_des);
  R.col(1) = y;
  R.col(2) = z_des;
  return R;
}

/// PD position law on a geometric attitude loop, emitting collective
/// thrust and bodyrates. Jerk feeds forward into the tilt rates.
inline CommandSetpoint track_reference(const QuadrotorState& s, const TrackingReference& ref,
                                       const TrackingGains& k) {
  const Vec3 a_des = ref.acceleration + k.kp.cwiseProduct(ref.position - s.position) +
                     k.kd.cwiseProduct(ref.velocity - s.velocity);
  Vec3 f = a_des - gravity_vector();
  if (f.z() < 0.5) f.z() = 0.5;  // never command thrust pointing down
  const double f_norm = f.norm();
  const Vec3 z_des = f / f_norm;
  const Mat3 Rd = desired_rotation(z_des, ref.yaw);
  const Mat3 R = s.rotation();

  const Vec3 e_R = 0.5 * vee(Rd.transpose() * R - R.transpose() * Rd);
  const Vec3 h = (ref.jerk - z_des.dot(ref.jerk) * z_des) / f_norm;
  const Vec3 w_ff_world = z_des.cross(h);
  Vec3 w = R.transpose() * w_ff_world - k.k_attitude * e_R;
  w.z() -= (k.k_yaw - k.k_attitude) * e_R.z();

  CommandSetpoint out;
  out.thrust = f.dot(R.col(2));
  out.bodyrate = w;
  return out;
}

inline TrackingReference reference_from(const MinJerkTrajectory& traj, double t, double yaw) {
  const double tc = std::clamp(t, 0.0, traj.duration);
  TrackingReference r;
  r.position = traj.position(tc);
  r.velocity = traj.velocity(tc);
  r.acceleration = traj.acceleration(tc);
  r.jerk = traj.jerk(tc);
  if (t > traj.duration) {
    // Hold the terminal velocity past the end.
    r.position += r.velocity * (t - traj.duration);
    r.acceleration.setZero();
    r.jerk.setZero();
  }
  r.yaw = yaw;
  return r;
}

}  // namespace gapflight
