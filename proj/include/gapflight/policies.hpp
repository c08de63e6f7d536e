#pragma once

#include <memory>
#include <string>

#include "gapflight/controller.hpp"
#include "gapflight/environment.hpp"

namespace gapflight {

/// Scripted policies for rollouts and smoke tests. They may read the
/// privileged simulator state through the environment.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(std::uint64_t /*seed*/) {}
  virtual CommandSetpoint act(const Env& env, const StepResult& last) = 0;
};

/// Holds the position and heading the episode started at.
class HoverPolicy : public Policy {
 public:
  CommandSetpoint act(const Env& env, const StepResult& last) override {
    const QuadrotorState& s = env.state();
    if (last.step == 0) {
      ref_ = TrackingReference{};
      ref_.position = s.position;
      const Vec3 x = s.attitude * Vec3::UnitX();
      ref_.yaw = std::atan2(x.y(), x.x());
    }
    return track_reference(s, ref_, gains_);
  }

 private:
  TrackingReference ref_;
  TrackingGains gains_;
};

class RandomPolicy : public Policy {
 public:
  void reset(std::uint64_t seed) override { rng_.seed(mix_seed(seed, 0x7a11)); }
  CommandSetpoint act(const Env& env, const StepResult&) override {
    const auto& b = env.config().action_bounds;
    CommandSetpoint a;
    a.thrust = rng_.uniform(b.thrust_min, b.thrust_max);
    for (int i = 0; i < 3; ++i) a.bodyrate[i] = rng_.uniform(-b.bodyrate_max, b.bodyrate_max);
    return a;
  }

 private:
  Rng rng_;
};

/// Flies along the target gap's axis at constant speed, heading along the
/// gap normal. Ignores the gap roll, so it only clears wide openings.
class GapApproachPolicy : public Policy {
 public:
  explicit GapApproachPolicy(double speed = 2.0, double lead = 0.3) : speed_(speed), lead_(lead) {}

  CommandSetpoint act(const Env& env, const StepResult&) override {
    const GapSpec& gap = env.gaps()[static_cast<std::size_t>(env.target_gap())];
    const QuadrotorState& s = env.state();
    const Vec3 n = gap.normal();
    const Vec3 c = gap.passable_center();
    const double xg = (s.position - c).dot(n);
    TrackingReference ref;
    ref.position = c + (xg + lead_) * n;
    ref.velocity = speed_ * n;
    ref.yaw = gap.yaw();
    return track_reference(s, ref, gains_);
  }

 private:
  double speed_;
  double lead_;
  TrackingGains gains_;
};

inline const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names{"hover", "random", "approach"};
  return names;
}

inline std::unique_ptr<Policy> make_policy(const std::string& name) {
  if (name == "hover") return std::make_unique<HoverPolicy>();
  if (name == "random") return std::make_unique<RandomPolicy>();
  if (name == "approach") return std::make_unique<GapApproachPolicy>();
  throw std::invalid_argument("unknown policy '" + name + "'");
}

}  // namespace gapflight
