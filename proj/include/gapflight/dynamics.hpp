#pragma once

#include <array>
#include <concepts>
#include <stdexcept>

#include "gapflight/math.hpp"

namespace gapflight {

/// Full rigid-body state. Position and velocity are in the world frame
/// (z up), attitude maps body to world, bodyrate is in the body frame.
struct QuadrotorState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Quat attitude = Quat::Identity();
  Vec3 bodyrate = Vec3::Zero();

  Mat3 rotation() const { return attitude.toRotationMatrix(); }
  Vec3 body_velocity() const { return attitude.conjugate() * velocity; }

  bool finite() const {
    return all_finite(position) && all_finite(velocity) &&
           all_finite(attitude) && all_finite(bodyrate);
  }
};

/// Collective mass-normalized thrust [m/s^2] plus three bodyrates [rad/s].
/// Channel order is (thrust, wx, wy, wz) everywhere.
struct CommandSetpoint {
  double thrust = kGravity;
  Vec3 bodyrate = Vec3::Zero();

  static CommandSetpoint hover() { return {}; }

  std::array<double, 4> channels() const {
    return {thrust, bodyrate.x(), bodyrate.y(), bodyrate.z()};
  }
  static CommandSetpoint from_channels(const std::array<double, 4>& c) {
    return {c[0], Vec3(c[1], c[2], c[3])};
  }
};

/// What the flight controller actually executes after delay and averaging.
struct ActuatorOutput {
  double thrust = kGravity;
  Vec3 bodyrate = Vec3::Zero();

  std::array<double, 4> channels() const {
    return {thrust, bodyrate.x(), bodyrate.y(), bodyrate.z()};
  }
  static ActuatorOutput from_channels(const std::array<double, 4>& c) {
    return {c[0], Vec3(c[1], c[2], c[3])};
  }
};

struct DragParams {
  Vec3 linear{0.3, 0.3, 0.15};      // 1/s per body axis
  Vec3 quadratic{0.05, 0.05, 0.025};  // 1/m per body axis

  static DragParams none() { return {Vec3::Zero(), Vec3::Zero()}; }

  bool valid() const {
    return (linear.array() >= 0.0).all() && (quadratic.array() >= 0.0).all() &&
           linear.allFinite() && quadratic.allFinite();
  }
};

struct DynamicsParams {
  // First-order lag of the body rate toward the executed setpoint. Zero
  // makes the body rate follow the setpoint instantly.
  double attitude_time_constant = 0.03;
  double control_period = 1.0 / 60.0;
  int substeps = 4;

  double substep_dt() const { return control_period / substeps; }
};

namespace detail {

struct StateDerivative {
  Vec3 dp, dv;
  Eigen::Vector4d dq;  // (w, x, y, z)
  Vec3 dw;
};

inline Eigen::Vector4d quat_vec(const Quat& q) {
  return {q.w(), q.x(), q.y(), q.z()};
}

inline Quat vec_quat(const Eigen::Vector4d& v) {
  return Quat(v[0], v[1], v[2], v[3]);
}

inline StateDerivative derivative(const Vec3& v, const Eigen::Vector4d& qv,
                                  const Vec3& w, const ActuatorOutput& act,
                                  const DragParams& drag,
                                  const Vec3& external_accel, double tau) {
  // The quaternion is used unnormalized inside a stage; normalize for R.
  const Quat q = vec_quat(qv).normalized();
  const Mat3 R = q.toRotationMatrix();
  const Vec3 vb = R.transpose() * v;
  const Vec3 f_drag = drag.linear.cwiseProduct(vb) +
                      drag.quadratic.cwiseProduct(vb.cwiseAbs()).cwiseProduct(vb);
  const Vec3 thrust_b(0.0, 0.0, act.thrust);

  StateDerivative d;
  d.dp = v;
  d.dv = R * (thrust_b - f_drag) + gravity_vector() + external_accel;
  // qdot = 1/2 q (x) [0, w]
  const Quat pure(0.0, w.x(), w.y(), w.z());
  const Quat qw = vec_quat(qv) * pure;
  d.dq = 0.5 * quat_vec(qw);
  d.dw = tau > 0.0 ? Vec3((act.bodyrate - w) / tau) : Vec3::Zero();
  return d;
}

}  // namespace detail

template <typename F>
concept ActuatorProfile = std::invocable<F, double> &&
    std::convertible_to<std::invoke_result_t<F, double>, ActuatorOutput>;

/// One RK4 step of length dt starting at time t0 with a time-varying
/// executed command `actuator(t)`. External acceleration is world-frame.
template <ActuatorProfile F>
QuadrotorState integrate_step(const QuadrotorState& state, F&& actuator,
                              const DragParams& drag, const Vec3& external_accel,
                              double t0, double dt,
                              double attitude_time_constant) {
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw std::invalid_argument("integrate_step: dt must be positive and finite");
  if (!state.finite() || !all_finite(external_accel) || !drag.valid() ||
      !std::isfinite(t0) || !std::isfinite(attitude_time_constant))
    throw std::invalid_argument("integrate_step: non-finite input");

  const double tau = attitude_time_constant;
  Vec3 w0 = state.bodyrate;
  if (!(tau > 0.0)) w0 = ActuatorOutput(actuator(t0)).bodyrate;

  const Vec3 p0 = state.position;
  const Vec3 v0 = state.velocity;
  const Eigen::Vector4d q0 = detail::quat_vec(state.attitude);

  auto eval = [&](double t, const Vec3& v, const Eigen::Vector4d& q,
                  const Vec3& w) {
    const ActuatorOutput act = actuator(t);
    if (!std::isfinite(act.thrust) || !all_finite(act.bodyrate))
      throw std::invalid_argument("integrate_step: non-finite actuator input");
    return detail::derivative(v, q, w, act, drag, external_accel, tau);
  };

  const double h = dt;
  const auto k1 = eval(t0, v0, q0, w0);
  const auto k2 = eval(t0 + 0.5 * h, v0 + 0.5 * h * k1.dv, q0 + 0.5 * h * k1.dq,
                       w0 + 0.5 * h * k1.dw);
  const auto k3 = eval(t0 + 0.5 * h, v0 + 0.5 * h * k2.dv, q0 + 0.5 * h * k2.dq,
                       w0 + 0.5 * h * k2.dw);
  const auto k4 = eval(t0 + h, v0 + h * k3.dv, q0 + h * k3.dq, w0 + h * k3.dw);

  QuadrotorState out;
  out.position = p0 + h / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
  out.velocity = v0 + h / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  out.attitude = detail::vec_quat(
                     q0 + h / 6.0 * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq))
                     .normalized();
  out.bodyrate = w0 + h / 6.0 * (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw);
  return out;
}

/// Constant executed command over the step.
inline QuadrotorState integrate_step(const QuadrotorState& state,
                                     const ActuatorOutput& actuator,
                                     const DragParams& drag,
                                     const Vec3& external_accel, double dt,
                                     double attitude_time_constant = 0.03) {
  return integrate_step(
      state, [&actuator](double) { return actuator; }, drag, external_accel,
      0.0, dt, attitude_time_constant);
}

/// Advances one control period using `params.substeps` RK4 substeps.
inline QuadrotorState integrate_control_period(const QuadrotorState& state,
                                               const ActuatorOutput& actuator,
                                               const DragParams& drag,
                                               const Vec3& external_accel,
                                               const DynamicsParams& params) {
  QuadrotorState s = state;
  const double dt = params.substep_dt();
  for (int i = 0; i < params.substeps; ++i)
    s = integrate_step(s, actuator, drag, external_accel, dt,
                       params.attitude_time_constant);
  return s;
}

}  // namespace gapflight
