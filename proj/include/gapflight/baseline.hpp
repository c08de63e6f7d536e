#pragma once

#include <charconv>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "gapflight/actuator.hpp"
#include "gapflight/clearance.hpp"
#include "gapflight/controller.hpp"
#include "gapflight/planner.hpp"
#include "gapflight/sensing.hpp"

namespace gapflight {

/// Estimation error that grows with the square of the distance d to the
/// gap center: yaw ~ U(+-eps d^2) degrees, position ~ U(+-delta d^2) m.
struct NoiseModel {
  double yaw_coeff = 0.0;       // eps, degrees / m^2
  double position_coeff = 0.0;  // delta, m / m^2

  void validate() const {
    if (!(yaw_coeff >= 0.0) || !(position_coeff >= 0.0) || !std::isfinite(yaw_coeff) ||
        !std::isfinite(position_coeff))
      throw std::invalid_argument("noise coefficients must be finite and >= 0");
  }
};

/// Rigid error between the true and the believed world: the believed pose
/// is the true pose rotated by `yaw` about the vehicle and shifted by
/// `offset`.
struct EstimationError {
  Vec3 pivot = Vec3::Zero();
  Vec3 offset = Vec3::Zero();
  double yaw = 0.0;  // rad

  Mat3 rotation() const { return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix(); }
  Vec3 to_believed(const Vec3& p) const { return pivot + offset + rotation() * (p - pivot); }
  Vec3 to_true(const Vec3& p) const {
    return pivot + rotation().transpose() * (p - pivot - offset);
  }
  Vec3 vector_to_true(const Vec3& v) const { return rotation().transpose() * v; }
};

inline EstimationError sample_estimation_error(const Vec3& position, double d,
                                               const NoiseModel& model, Rng& rng) {
  if (!(d >= 0.0)) throw std::invalid_argument("noisy_state: distance must be >= 0");
  const double d2 = d * d;
  EstimationError e;
  e.pivot = position;
  const double yaw_bound = model.yaw_coeff * d2;
  e.yaw = deg2rad(rng.uniform(-yaw_bound, yaw_bound));
  const double pb = model.position_coeff * d2;
  for (int i = 0; i < 3; ++i) e.offset[i] = rng.uniform(-pb, pb);
  return e;
}

/// Believed state: yaw and position corrupted, roll and pitch kept.
inline QuadrotorState apply_error(const QuadrotorState& s, const EstimationError& e) {
  QuadrotorState out = s;
  const Quat qz(Eigen::AngleAxisd(e.yaw, Vec3::UnitZ()));
  out.position = e.to_believed(s.position);
  out.velocity = qz * s.velocity;
  out.attitude = (qz * s.attitude).normalized();
  return out;
}

inline QuadrotorState noisy_state(const QuadrotorState& s, double d, const NoiseModel& model,
                                  Rng& rng) {
  return apply_error(s, sample_estimation_error(s.position, d, model, rng));
}

struct BaselineConfig {
  Rectangle gap_shape{0.6, 0.2};
  double terminal_distance = 0.3;  // d_min before the plane
  double terminal_speed = 3.0;     // m/s, must not exceed 4
  double initial_time_factor = 2.0;  // first t_guess = factor * distance / terminal speed
  FeasibilityLimits limits{0.41 * kGravity, 2.04 * kGravity, 8.0, 0.01};
  TimeSampling time_sampling;
  TrackingGains gains;
  ResponseParams response{{1, 1, 1, 1}, 1};
  DragParams drag = DragParams::none();
  DynamicsParams dynamics;
  ColliderSpec collider;
  CameraModel camera = CameraModel::baseline();
  double feedforward_preview = 0.04;  // s, compensates actuation lag
  int replan_every = 1;        // control steps between visual updates
  double exit_margin = 0.5;    // m past the plane
  double traverse_dt = 1.0 / 240.0;
  double max_time = 10.0;      // s

  void validate() const {
    if (!(terminal_speed > 0.0 && terminal_speed <= 4.0))
      throw std::invalid_argument("terminal speed must be in (0, 4] m/s");
    if (!(terminal_distance > 0.0)) throw std::invalid_argument("terminal distance must be > 0");
    if (replan_every < 1) throw std::invalid_argument("replan_every must be >= 1");
  }
};

struct BaselineScenario {
  double start_distance = 2.5;  // X0, m before the plane
  double gap_roll = 0.0;        // phi_gap, rad
  NoiseModel noise;
};

enum class BaselineOutcome { Success, Collision, NoPlan };

inline const char* to_string(BaselineOutcome o) {
  switch (o) {
    case BaselineOutcome::Success: return "success";
    case BaselineOutcome::Collision: return "collision";
    case BaselineOutcome::NoPlan: return "no-plan";
  }
  return "?";
}

struct BaselineRun {
  BaselineOutcome outcome = BaselineOutcome::NoPlan;
  int replans = 0;           // successful replans, including the first plan
  int replan_attempts = 0;
  std::vector<QuadrotorState> path;  // flown states
  QuadrotorState handover;           // state when the traverse starts
  TrackingReference handover_reference;
};

inline GapSpec baseline_gap(const BaselineConfig& cfg, const BaselineScenario& sc) {
  return GapSpec::from_normal_roll(Vec3(0.0, 0.0, 1.5), Vec3::UnitX(), sc.gap_roll, cfg.gap_shape);
}

inline KinematicState baseline_terminal_state(const GapSpec& gap, const BaselineConfig& cfg) {
  KinematicState t;
  t.position = gap.passable_center() - cfg.terminal_distance * gap.normal();
  t.velocity = cfg.terminal_speed * gap.normal();
  // Thrust along the gap's short axis so the body's wide side matches the
  // long edge while crossing.
  t.acceleration = kGravity * gap.axis_v() + gravity_vector();
  return t;
}

// Gap corners visible in the camera at the true state.
inline bool gap_in_view(const QuadrotorState& s, const GapSpec& gap, const CameraModel& cam) {
  for (const Vec2& uv : polygon_vertices(gap.shape)) {
    const Vec3 pb = s.attitude.conjugate() * (gap.to_world(uv) - s.position);
    const auto px = cam.project_body(pb);
    if (!px) return false;
    if (px->x() < 0.0 || px->x() >= cam.width || px->y() < 0.0 || px->y() >= cam.height) return false;
  }
  return true;
}

/// Closed loop: at each visual update the believed state is corrupted,
/// an approach is replanned in the believed world and mapped back to the
/// true world; the tracking controller flies it with the true state. After
/// the approach ends, a constant-velocity straight traverse is appended.
inline BaselineRun replan_episode(const BaselineScenario& sc, const BaselineConfig& cfg, Rng& rng,
                                  bool record_path = false) {
  cfg.validate();
  sc.noise.validate();
  const GapSpec gap = baseline_gap(cfg, sc);
  const KinematicState terminal = baseline_terminal_state(gap, cfg);
  const double yaw_ref = gap.yaw();

  QuadrotorState s;
  s.position = gap.passable_center() - sc.start_distance * gap.normal();
  s.attitude = quat_from_euler(0.0, 0.0, yaw_ref);

  CommandHistory history(cfg.response.required_history() + 8);
  history.fill(CommandSetpoint::hover());
  const double dt = cfg.dynamics.control_period;

  BaselineRun run;
  std::optional<MinJerkTrajectory> plan;
  EstimationError error;
  double plan_t = 0.0;  // time since the active plan started
  Vec3 accel_true = Vec3::Zero();

  auto try_replan = [&]() {
    ++run.replan_attempts;
    const double d = (s.position - gap.passable_center()).norm();
    const EstimationError e = sample_estimation_error(s.position, d, sc.noise, rng);
    const QuadrotorState b = apply_error(s, e);
    KinematicState init{b.position, b.velocity, e.rotation() * accel_true};
    const double guess = plan ? std::max(plan->duration - plan_t, 1e-3)
                              : cfg.initial_time_factor *
                                    (terminal.position - b.position).norm() / cfg.terminal_speed;
    const auto T = sample_execution_time(
        guess,
        [&](double T) { return feasibility_check(min_jerk_trajectory(init, terminal, T), cfg.limits); },
        cfg.time_sampling);
    if (!T) return;
    plan = min_jerk_trajectory(init, terminal, *T);
    error = e;
    plan_t = 0.0;
    ++run.replans;
  };

  auto reference = [&]() {
    TrackingReference r = reference_from(*plan, plan_t, yaw_ref);
    if (cfg.feedforward_preview > 0.0) {
      const TrackingReference ahead =
          reference_from(*plan, plan_t + cfg.feedforward_preview, yaw_ref);
      r.acceleration = ahead.acceleration;
      r.jerk = ahead.jerk;
    }
    r.position = error.to_true(r.position);
    r.velocity = error.vector_to_true(r.velocity);
    r.acceleration = error.vector_to_true(r.acceleration);
    r.jerk = error.vector_to_true(r.jerk);
    r.yaw = yaw_ref - error.yaw;
    return r;
  };

  const long max_steps = static_cast<long>(cfg.max_time / dt);
  if (record_path) run.path.push_back(s);
  try_replan();
  if (!plan) {
    run.outcome = BaselineOutcome::NoPlan;
    return run;
  }

  for (long k = 0; k < max_steps; ++k) {
    if (plan_t >= plan->duration) break;
    if (k > 0 && k % cfg.replan_every == 0 && gap_in_view(s, gap, cfg.camera)) try_replan();
    const CommandSetpoint cmd = track_reference(s, reference(), cfg.gains);
    history.push(cmd);
    const ActuatorOutput out = actuator_response(history, cfg.response);
    const Vec3 v0 = s.velocity;
    s = integrate_control_period(s, out, cfg.drag, Vec3::Zero(), cfg.dynamics);
    accel_true = (s.velocity - v0) / dt;
    plan_t += dt;
    if (record_path) run.path.push_back(s);
    if (s.position.z() < 0.0 ||
        clearance_check(s, gap, cfg.collider).classification == Clearance::Collision) {
      run.outcome = BaselineOutcome::Collision;
      return run;
    }
  }

  // Straight traverse at the planned terminal velocity, attitude held.
  const Vec3 v = error.vector_to_true(plan->velocity(plan->duration));
  run.handover = s;
  run.handover_reference = reference();
  s.bodyrate.setZero();
  const double tmax = 5.0;
  for (double t = 0.0; t < tmax; t += cfg.traverse_dt) {
    s.position += v * cfg.traverse_dt;
    if (record_path) run.path.push_back(s);
    if (clearance_check(s, gap, cfg.collider).classification == Clearance::Collision) {
      run.outcome = BaselineOutcome::Collision;
      return run;
    }
    if (fully_traversed(s, gap, cfg.collider) && gap_coordinate(s, gap) > cfg.exit_margin) {
      run.outcome = BaselineOutcome::Success;
      return run;
    }
  }
  run.outcome = BaselineOutcome::Collision;  // never made it through
  return run;
}

// ---------------------------------------------------------------------------
// Monte Carlo over a scenario grid.

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
};

inline WilsonInterval wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double p = static_cast<double>(successes) / static_cast<double>(n);
  const double nn = static_cast<double>(n);
  const double denom = 1.0 + z * z / nn;
  const double center = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  const double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
  const double hi = successes == n ? 1.0 : std::min(1.0, center + half);
  return {lo, hi};
}

struct McCell {
  double eps = 0.0;
  double delta = 0.0;
  double x0 = 2.5;
  double phi_gap = 0.0;  // degrees
};

struct McResult {
  McCell cell;
  std::size_t successes = 0;
  std::size_t collisions = 0;
  std::size_t no_plans = 0;
  std::size_t n = 0;
  double success_rate = 0.0;
  WilsonInterval ci;
};

inline BaselineScenario scenario_of(const McCell& c) {
  BaselineScenario s;
  s.start_distance = c.x0;
  s.gap_roll = deg2rad(c.phi_gap);
  s.noise = {c.eps, c.delta};
  return s;
}

/// Every cell runs seeds 0..n-1, each with its own stream derived from
/// (base_seed, cell index, seed index); results are independent of the
/// worker count.
inline std::vector<McResult> monte_carlo_success(const std::vector<McCell>& grid, std::size_t n,
                                                 const BaselineConfig& cfg,
                                                 std::uint64_t base_seed = 0, int workers = 1) {
  if (n < 1) throw std::invalid_argument("monte_carlo_success: N must be >= 1");
  const std::size_t total = grid.size() * n;
  std::vector<BaselineOutcome> outcomes(total);
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const std::size_t c = idx / n, i = idx % n;
      Rng rng(mix_seed(mix_seed(base_seed, c), i));
      outcomes[idx] = replan_episode(scenario_of(grid[c]), cfg, rng).outcome;
    }
  };
  const std::size_t w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || total < 2) {
    run_range(0, total);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (total + w - 1) / w;
    for (std::size_t t = 0; t < w; ++t) {
      const std::size_t b = t * chunk, e = std::min(total, b + chunk);
      if (b < e) pool.emplace_back(run_range, b, e);
    }
    for (auto& th : pool) th.join();
  }

  std::vector<McResult> out;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    McResult r;
    r.cell = grid[c];
    r.n = n;
    for (std::size_t i = 0; i < n; ++i) {
      switch (outcomes[c * n + i]) {
        case BaselineOutcome::Success: ++r.successes; break;
        case BaselineOutcome::Collision: ++r.collisions; break;
        case BaselineOutcome::NoPlan: ++r.no_plans; break;
      }
    }
    r.success_rate = static_cast<double>(r.successes) / static_cast<double>(n);
    r.ci = wilson_interval(r.successes, n);
    out.push_back(r);
  }
  return out;
}

inline const char* kMcCsvHeader = "eps,delta,x0,phi_gap,success_rate,ci_lo,ci_hi,n";

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline void write_mc_csv(std::ostream& out, const std::vector<McResult>& results) {
  out << kMcCsvHeader << '\n';
  for (const auto& r : results) {
    for (double v : {r.cell.eps, r.cell.delta, r.cell.x0, r.cell.phi_gap, r.success_rate, r.ci.lo, r.ci.hi})
      out << format_double(v) << ',';
    out << r.n << '\n';
  }
}

}  // namespace gapflight
