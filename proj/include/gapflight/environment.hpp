#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gapflight/actuator.hpp"
#include "gapflight/clearance.hpp"
#include "gapflight/dataset.hpp"
#include "gapflight/dynamics.hpp"
#include "gapflight/randomization.hpp"
#include "gapflight/reward.hpp"
#include "gapflight/sensing.hpp"
#include "gapflight/track.hpp"

namespace gapflight {

enum class ObservationKind { Points, Mask };
enum class Outcome { Running, Collision, Success, Timeout };

inline const char* to_string(ObservationKind k) { return k == ObservationKind::Points ? "points" : "mask"; }

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Running: return "running";
    case Outcome::Collision: return "collision";
    case Outcome::Success: return "success";
    case Outcome::Timeout: return "timeout";
  }
  return "?";
}

struct ActionBounds {
  double thrust_min = 6.0;   // m/s^2
  double thrust_max = 20.0;
  double bodyrate_max = 6.0;  // rad/s per axis

  CommandSetpoint clamp(const CommandSetpoint& a) const {
    CommandSetpoint out;
    out.thrust = std::clamp(a.thrust, thrust_min, thrust_max);
    for (int i = 0; i < 3; ++i) out.bodyrate[i] = std::clamp(a.bodyrate[i], -bodyrate_max, bodyrate_max);
    return out;
  }
};

struct EpisodeConfig {
  TrackConfig track = presets::track("single_rect");
  int horizon = 600;
  ObservationKind observation = ObservationKind::Points;
  int num_points = 32;
  RandomizationConfig randomization = RandomizationConfig::single_rl();
  RewardConfig reward;
  CameraModel camera;
  LatencyModel latency{1, 1};
  ResponseParams response;
  DragParams drag;
  DynamicsParams dynamics;
  ColliderSpec collider;
  ActionBounds action_bounds;
  double informed_reset_probability = 0.5;
  bool ground_collision = true;
  int reset_attempts = 1000;

  void validate() const {
    track.validate();
    if (horizon <= 0) throw std::invalid_argument("horizon must be > 0");
    if (num_points < 3) throw std::invalid_argument("num_points must be >= 3");
    randomization.validate();
    camera.validate();
    if (!latency.valid()) throw std::invalid_argument("latency delays must be >= 0");
    if (response.window < 1) throw std::invalid_argument("response window must be >= 1");
    for (int h : response.delay)
      if (h < 1) throw std::invalid_argument("response delays must be >= 1");
    if (!drag.valid()) throw std::invalid_argument("drag coefficients must be finite and >= 0");
    if (!collider.valid()) throw std::invalid_argument("collider half extents must be > 0");
    if (!(informed_reset_probability >= 0.0 && informed_reset_probability <= 1.0))
      throw std::invalid_argument("informed_reset_probability must be in [0, 1]");
    if (!(action_bounds.thrust_min < action_bounds.thrust_max) || !(action_bounds.bodyrate_max > 0.0))
      throw std::invalid_argument("bad action bounds");
    if (reset_attempts < 1) throw std::invalid_argument("reset_attempts must be >= 1");
  }
};

struct StepInfo {
  Clearance clearance = Clearance::Free;  // worst class over all gaps
  double xg = 0.0;                        // vehicle center w.r.t. the target gap
  bool fully_traversed = false;           // of the target gap at this step
  int traversal_label = -1;
  int target_gap = 0;       // gap the reward is computed against
  int gaps_passed = 0;
  Outcome outcome = Outcome::Running;
  bool reset_from_buffer = false;
  CommandSetpoint executed_setpoint;  // after clamping
  ActuatorOutput actuation;
  Vec3 perturbation = Vec3::Zero();
};

struct StepResult {
  ObservationBundle observation;
  RewardBreakdown reward;
  bool done = false;
  StepInfo info;
  QuadrotorState state;  // true post-step state
  long step = 0;
};

/// +1 iff the whole collider is past the plane.
inline int traversal_label(const QuadrotorState& state, const GapSpec& gap,
                           const ColliderSpec& collider) {
  return fully_traversed(state, gap, collider) ? 1 : -1;
}

inline Clearance worst(Clearance a, Clearance b) {
  return static_cast<int>(a) >= static_cast<int>(b) ? a : b;
}

/// One simulated episode at a time; single-owner, not thread-safe.
class Env {
 public:
  explicit Env(EpisodeConfig cfg, std::shared_ptr<const SeedTrajectoryDataset> dataset = nullptr)
      : cfg_(std::move(cfg)),
        dataset_(std::move(dataset)),
        history_(16) {
    cfg_.validate();
    if (cfg_.response.required_history() + 4 > history_.capacity())
      history_ = CommandHistory(cfg_.response.required_history() * 2 + 8);
  }

  const EpisodeConfig& config() const { return cfg_; }
  const QuadrotorState& state() const { return state_; }
  const std::vector<GapSpec>& gaps() const { return gaps_; }
  int target_gap() const { return target_; }
  int observed_gap() const { return observed_; }
  bool done() const { return done_; }
  long step_count() const { return steps_; }
  const PerturbationState& perturbation() const { return perturbation_; }
  const ResponseRandomization& response_randomization() const { return response_; }
  const DragParams& drag() const { return drag_; }
  const CameraModel& camera() const { return camera_; }
  bool reset_from_buffer() const { return from_buffer_; }

  StepResult reset(std::uint64_t seed) {
    rng_.seed(seed);
    steps_ = 0;
    done_ = false;
    from_buffer_ = false;
    target_ = 0;
    observed_ = 0;
    gaps_passed_ = 0;
    mask_seen_ = false;

    const bool use_buffer = dataset_ && !dataset_->empty() &&
                            rng_.bernoulli(cfg_.informed_reset_probability);
    if (use_buffer) from_buffer_ = reset_from_dataset();
    if (!from_buffer_) reset_from_task_space();

    const auto& rc = cfg_.randomization;
    drag_ = rc.drag.enabled ? randomize_drag(rng_, cfg_.drag, rc.drag.scale) : cfg_.drag;
    response_ = rc.response.enabled ? sample_response_randomization(rng_, rc.response, cfg_.response)
                                    : nominal_response(cfg_.response);
    perturbation_ = PerturbationState{};
    camera_ = cfg_.camera;
    camera_.focal_scale *= rng_.uniform(1.0 - rc.focal_scale_range, 1.0 + rc.focal_scale_range);
    mask_block_ = sample_mask_block(rng_);

    history_.fill(CommandSetpoint::hover());
    prev_action_ = CommandSetpoint::hover();
    advance_target();
    observed_ = target_;

    ObservationBundle obs = capture();
    queue_.reset(cfg_.latency.total(), obs);

    StepResult r;
    r.observation = std::move(obs);
    r.state = state_;
    r.info = make_info(clearance_all(), false);
    r.info.executed_setpoint = prev_action_;
    r.info.actuation = ActuatorOutput{};
    return r;
  }

  StepResult step(const CommandSetpoint& action) {
    if (done_) throw std::logic_error("Env::step called on a finished episode; call reset first");
    const CommandSetpoint cmd = cfg_.action_bounds.clamp(action);
    history_.push(cmd);
    const ActuatorOutput out =
        actuator_response(history_, response_.params(cfg_.response.window), response_.factors);

    const GapSpec& target = gaps_[static_cast<std::size_t>(target_)];
    perturbation_ = maybe_spawn_perturbation(rng_, state_, gap_coordinate(state_, target),
                                             perturbation_, cfg_.randomization.perturbation);
    const Vec3 ext = perturbation_.applied();

    const QuadrotorState prev = state_;
    state_ = integrate_control_period(state_, out, drag_, ext, cfg_.dynamics);
    ++steps_;
    response_ = advance_response_randomization(rng_, response_, cfg_.randomization.response,
                                               cfg_.response);

    Clearance cl = clearance_all();
    const bool ground = cfg_.ground_collision && state_.position.z() < 0.0;
    if (ground || !state_.finite()) cl = Clearance::Collision;

    TransitionSnapshot snap{prev, state_, prev_action_, cmd, target,
                            cl == Clearance::Collision
                                ? Clearance::Collision
                                : clearance_check(state_, target, cfg_.collider).classification};
    StepResult r;
    r.reward = compute_reward(snap, cfg_.reward);
    prev_action_ = cmd;

    const bool traversed = fully_traversed(state_, target, cfg_.collider);
    r.info = make_info(cl, traversed);
    r.info.executed_setpoint = cmd;
    r.info.actuation = out;
    r.info.perturbation = ext;
    const int reward_gap = target_;
    advance_target();
    r.info.gaps_passed = gaps_passed_;
    r.info.target_gap = reward_gap;

    const GapSpec& last = gaps_.back();
    Outcome outcome = Outcome::Running;
    if (cl == Clearance::Collision) {
      outcome = Outcome::Collision;
    } else if (gaps_passed_ == static_cast<int>(gaps_.size()) &&
               gap_coordinate(state_, last) > cfg_.track.exit_margin) {
      outcome = Outcome::Success;
    } else if (steps_ >= cfg_.horizon) {
      outcome = Outcome::Timeout;
    }
    r.info.outcome = outcome;
    done_ = outcome != Outcome::Running;
    r.done = done_;

    r.observation = queue_.push(capture());
    r.state = state_;
    r.step = steps_;
    return r;
  }

 private:
  bool reset_from_dataset() {
    const auto& trs = dataset_->trajectories;
    for (int attempt = 0; attempt < cfg_.reset_attempts; ++attempt) {
      const auto& tr = trs[static_cast<std::size_t>(
          rng_.uniform_int(0, static_cast<std::int64_t>(trs.size()) - 1))];
      const auto& s = tr.samples[static_cast<std::size_t>(
          rng_.uniform_int(0, static_cast<std::int64_t>(tr.samples.size()) - 1))];
      const QuadrotorState st = s.state();
      if (!reset_state_valid(st, tr.gaps)) continue;
      state_ = st;
      gaps_ = tr.gaps;
      return true;
    }
    return false;
  }

  void reset_from_task_space() {
    for (int attempt = 0; attempt < cfg_.reset_attempts; ++attempt) {
      gaps_ = randomize_track(cfg_.track, rng_);
      const GapSpec& g0 = gaps_.front();
      const Vec3 n = g0.normal();
      Vec3 nh(n.x(), n.y(), 0.0);
      if (nh.norm() < 1e-9) nh = Vec3::UnitX();
      nh.normalize();
      const Vec3 yh = Vec3::UnitZ().cross(nh);
      const auto& box = cfg_.track.start_region;
      const double x = box.x.sample(rng_), y = box.y.sample(rng_), z = box.z.sample(rng_);
      QuadrotorState st;
      st.position = g0.center + x * nh + y * yh;
      st.position.z() = z;
      const Vec3 to_gap = g0.passable_center() - st.position;
      st.attitude = quat_from_euler(0.0, 0.0, std::atan2(to_gap.y(), to_gap.x()));
      if (!reset_state_valid(st, gaps_)) continue;
      state_ = st;
      return;
    }
    throw std::runtime_error("reset: no valid start state found in the task space");
  }

  bool reset_state_valid(const QuadrotorState& st, const std::vector<GapSpec>& gaps) const {
    if (!st.finite()) return false;
    if (cfg_.ground_collision && st.position.z() < 0.0) return false;
    for (const auto& g : gaps)
      if (clearance_check(st, g, cfg_.collider).classification != Clearance::Free) return false;
    // Not already past the final gap.
    return !fully_traversed(st, gaps.back(), cfg_.collider);
  }

  // Moves the target past every gap the collider has fully crossed.
  void advance_target() {
    const int n = static_cast<int>(gaps_.size());
    while (gaps_passed_ < n &&
           fully_traversed(state_, gaps_[static_cast<std::size_t>(gaps_passed_)], cfg_.collider))
      ++gaps_passed_;
    target_ = std::min(gaps_passed_, n - 1);
  }

  Clearance clearance_all() const {
    Clearance c = Clearance::Free;
    for (const auto& g : gaps_) c = worst(c, clearance_check(state_, g, cfg_.collider).classification);
    return c;
  }

  StepInfo make_info(Clearance cl, bool traversed) const {
    StepInfo info;
    info.clearance = cl;
    info.xg = gap_coordinate(state_, gaps_[static_cast<std::size_t>(target_)]);
    info.fully_traversed = traversed;
    info.traversal_label = traversed ? 1 : -1;
    info.target_gap = target_;
    info.gaps_passed = gaps_passed_;
    info.reset_from_buffer = from_buffer_;
    return info;
  }

  BinaryImage render_observed() {
    BinaryImage img = render_mask(state_, gaps_[static_cast<std::size_t>(observed_)], camera_);
    return img;
  }

  ObservationBundle capture() {
    ObservationBundle obs;
    const int last = static_cast<int>(gaps_.size()) - 1;
    if (cfg_.observation == ObservationKind::Points) {
      observed_ = target_;
    } else {
      BinaryImage img = render_observed();
      // The next gap becomes visible only once the current one has been
      // seen and then disappears from the image.
      while (img.empty_mask() && mask_seen_ && observed_ < last) {
        ++observed_;
        mask_seen_ = false;
        img = render_observed();
      }
      if (!img.empty_mask()) mask_seen_ = true;
      if (cfg_.randomization.mask_noise && img.width % mask_block_ == 0 &&
          img.height % mask_block_ == 0)
        img = randomize_mask(img, mask_block_, rng_);
      obs.mask = std::move(img);
    }
    obs.gap_points = observe_gap_points(state_, gaps_[static_cast<std::size_t>(observed_)],
                                        cfg_.num_points);
    const auto [roll, pitch] = roll_pitch(state_.attitude);
    obs.roll = roll;
    obs.pitch = pitch;
    obs.previous_action = prev_action_;
    obs.body_velocity = state_.body_velocity();
    obs.timestamp = steps_;
    obs.observed_gap = observed_;
    return obs;
  }

  EpisodeConfig cfg_;
  std::shared_ptr<const SeedTrajectoryDataset> dataset_;
  Rng rng_;
  QuadrotorState state_;
  std::vector<GapSpec> gaps_;
  CommandHistory history_;
  CommandSetpoint prev_action_;
  DragParams drag_;
  ResponseRandomization response_;
  PerturbationState perturbation_;
  CameraModel camera_;
  int mask_block_ = 2;
  DelayLine<ObservationBundle> queue_;
  long steps_ = 0;
  bool done_ = false;
  bool from_buffer_ = false;
  int target_ = 0;
  int observed_ = 0;
  int gaps_passed_ = 0;
  bool mask_seen_ = false;
};

// ---------------------------------------------------------------------------
// Trajectory log: one JSON object per line.

inline Json state_to_json(const QuadrotorState& s) {
  return {{"p", io::to_json(s.position)},
          {"v", io::to_json(s.velocity)},
          {"q", io::to_json(s.attitude)},
          {"w", io::to_json(s.bodyrate)}};
}

inline Json channels_to_json(const std::array<double, 4>& c) {
  return Json::array({c[0], c[1], c[2], c[3]});
}

inline Json reward_to_json(const RewardBreakdown& r) {
  return {{"traversing", r.traversing}, {"shaping", r.shaping},
          {"smoothness", r.smoothness}, {"speed", r.speed},
          {"distillation_reg", r.distillation_reg}, {"approach_reg", r.approach_reg},
          {"total", r.total}};
}

inline Json step_record(std::size_t episode, const StepResult& r, double control_period) {
  Json j;
  j["episode"] = episode;
  j["step"] = r.step;
  j["t"] = static_cast<double>(r.step) * control_period;
  j["state"] = state_to_json(r.state);
  j["action"] = channels_to_json(r.info.executed_setpoint.channels());
  j["executed"] = channels_to_json(r.info.actuation.channels());
  j["reward"] = reward_to_json(r.reward);
  j["clearance"] = to_string(r.info.clearance);
  j["xg"] = r.info.xg;
  j["target_gap"] = r.info.target_gap;
  j["traversal_label"] = r.info.traversal_label;
  j["done"] = r.done;
  j["outcome"] = to_string(r.info.outcome);
  return j;
}

inline void write_step_record(std::ostream& out, std::size_t episode, const StepResult& r,
                              double control_period) {
  out << step_record(episode, r, control_period).dump() << '\n';
}

}  // namespace gapflight
