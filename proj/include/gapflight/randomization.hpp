#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "gapflight/actuator.hpp"
#include "gapflight/dynamics.hpp"

namespace gapflight {

struct PerturbationConfig {
  bool enabled = true;
  double probability = 0.1;           // p_f per eligible step
  Vec3 max_accel{2.0, 1.0, 1.0};      // m/s^2 per world axis
  int duration = 20;                  // control steps
  double min_distance = 1.5;          // m from the gap plane
  double max_bodyrate = 3.0;          // rad/s

  void validate() const {
    if (!(probability >= 0.0 && probability <= 1.0))
      throw std::invalid_argument("perturbation probability must be in [0, 1]");
    if (!((max_accel.array() >= 0.0).all() && max_accel.allFinite()))
      throw std::invalid_argument("perturbation max_accel must be finite and >= 0");
    if (duration < 1) throw std::invalid_argument("perturbation duration must be >= 1");
  }
};

struct PerturbationState {
  bool active = false;
  int remaining = 0;
  Vec3 acceleration = Vec3::Zero();

  Vec3 applied() const { return active ? acceleration : Vec3::Zero(); }
};

inline bool perturbation_eligible(const QuadrotorState& state, double xg,
                                  const PerturbationConfig& cfg) {
  return std::abs(xg) > cfg.min_distance && state.bodyrate.norm() < cfg.max_bodyrate;
}

/// Advances the perturbation by one control step. An active force counts
/// down and ends after `duration` applied steps; it is dropped as soon as
/// the vehicle is within `min_distance` of the plane. Otherwise, when
/// eligible, a new force starts with probability p_f.
inline PerturbationState maybe_spawn_perturbation(Rng& rng, const QuadrotorState& state, double xg,
                                                  const PerturbationState& current,
                                                  const PerturbationConfig& cfg) {
  PerturbationState next = current;
  if (next.active) {
    next.remaining -= 1;
    if (next.remaining <= 0 || std::abs(xg) <= cfg.min_distance) next = PerturbationState{};
    return next;
  }
  if (!cfg.enabled || !perturbation_eligible(state, xg, cfg)) return next;
  if (!rng.bernoulli(cfg.probability)) return next;
  next.active = true;
  next.remaining = cfg.duration;
  for (int i = 0; i < 3; ++i)
    next.acceleration[i] = rng.sign() * rng.uniform_open_closed(cfg.max_accel[i]);
  return next;
}

struct ResponseRandomizationConfig {
  bool enabled = true;
  std::array<double, 4> factor_range{0.1, 0.1, 0.1, 0.1};  // c_max per channel
  int hold_min = 30;
  int hold_max = 90;
  double thrust_delay_jitter = 0.4;
  double bodyrate_delay_jitter = 0.3;

  void validate() const {
    for (double c : factor_range)
      if (!(c >= 0.0 && c < 1.0)) throw std::invalid_argument("response factor range must be in [0, 1)");
    if (hold_min < 1 || hold_max < hold_min) throw std::invalid_argument("bad response hold range");
    if (!(thrust_delay_jitter >= 0.0 && thrust_delay_jitter < 1.0) ||
        !(bodyrate_delay_jitter >= 0.0 && bodyrate_delay_jitter < 1.0))
      throw std::invalid_argument("delay jitter must be in [0, 1)");
  }
};

struct ResponseRandomization {
  std::array<double, 4> factors{1.0, 1.0, 1.0, 1.0};
  int hold = 0;
  std::array<int, 4> delay{1, 1, 1, 1};

  ResponseParams params(int window) const {
    ResponseParams p;
    p.delay = delay;
    p.window = window;
    return p;
  }
};

inline int jitter_delay(Rng& rng, int nominal, double jitter) {
  const double scaled = nominal * rng.uniform(1.0 - jitter, 1.0 + jitter);
  return std::max(1, static_cast<int>(std::lround(scaled)));
}

inline ResponseRandomization sample_response_randomization(Rng& rng,
                                                           const ResponseRandomizationConfig& cfg,
                                                           const ResponseParams& nominal) {
  ResponseRandomization r;
  for (std::size_t i = 0; i < 4; ++i)
    r.factors[i] = rng.uniform(1.0 - cfg.factor_range[i], 1.0 + cfg.factor_range[i]);
  r.hold = static_cast<int>(rng.uniform_int(cfg.hold_min, cfg.hold_max));
  for (std::size_t i = 0; i < 4; ++i)
    r.delay[i] = jitter_delay(rng, nominal.delay[i],
                              i == 0 ? cfg.thrust_delay_jitter : cfg.bodyrate_delay_jitter);
  return r;
}

/// Nominal response (factors 1, nominal delays) used when disabled.
inline ResponseRandomization nominal_response(const ResponseParams& nominal) {
  ResponseRandomization r;
  r.delay = nominal.delay;
  r.hold = 0;
  return r;
}

/// One control step of the hold counter; resamples at expiry.
inline ResponseRandomization advance_response_randomization(Rng& rng,
                                                            const ResponseRandomization& current,
                                                            const ResponseRandomizationConfig& cfg,
                                                            const ResponseParams& nominal) {
  if (!cfg.enabled) return nominal_response(nominal);
  ResponseRandomization next = current;
  next.hold -= 1;
  if (next.hold <= 0) next = sample_response_randomization(rng, cfg, nominal);
  return next;
}

struct DragRandomizationConfig {
  bool enabled = true;
  double scale = 0.5;  // coefficients scaled by U(1 - scale, 1 + scale)
};

inline DragParams randomize_drag(Rng& rng, const DragParams& nominal, double scale = 0.5) {
  if (!nominal.valid()) throw std::invalid_argument("nominal drag must be finite and >= 0");
  DragParams out = nominal;
  for (int i = 0; i < 3; ++i) out.linear[i] *= rng.uniform(1.0 - scale, 1.0 + scale);
  for (int i = 0; i < 3; ++i) out.quadratic[i] *= rng.uniform(1.0 - scale, 1.0 + scale);
  return out;
}

struct RandomizationConfig {
  std::string name = "none";
  PerturbationConfig perturbation;
  ResponseRandomizationConfig response;
  DragRandomizationConfig drag;
  bool mask_noise = true;
  double focal_scale_range = 0.05;  // focal scale ~ U(1 - r, 1 + r) per episode

  void validate() const {
    perturbation.validate();
    response.validate();
    if (!(drag.scale >= 0.0 && drag.scale < 1.0)) throw std::invalid_argument("drag scale must be in [0, 1)");
    if (!(focal_scale_range >= 0.0 && focal_scale_range < 1.0))
      throw std::invalid_argument("focal scale range must be in [0, 1)");
  }

  static RandomizationConfig none() {
    RandomizationConfig c;
    c.name = "none";
    c.perturbation.enabled = false;
    c.response.enabled = false;
    c.drag.enabled = false;
    c.mask_noise = false;
    c.focal_scale_range = 0.0;
    return c;
  }

  static RandomizationConfig single_rl() {
    RandomizationConfig c;
    c.name = "single_rl";
    c.perturbation.probability = 0.1;
    c.perturbation.max_accel = {2.0, 1.0, 1.0};
    return c;
  }

  static RandomizationConfig single_distill() {
    RandomizationConfig c;
    c.name = "single_distill";
    c.perturbation.probability = 0.1;
    c.perturbation.max_accel = {1.5, 1.0, 1.0};
    return c;
  }

  static RandomizationConfig consecutive_distill() {
    RandomizationConfig c;
    c.name = "consecutive_distill";
    c.perturbation.probability = 0.05;
    c.perturbation.max_accel = {1.0, 0.5, 0.5};
    return c;
  }

  static RandomizationConfig preset(const std::string& name) {
    if (name == "none") return none();
    if (name == "single_rl") return single_rl();
    if (name == "single_distill") return single_distill();
    if (name == "consecutive_distill") return consecutive_distill();
    throw std::invalid_argument("unknown randomization preset '" + name + "'");
  }

  static const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"none", "single_rl", "single_distill",
                                                "consecutive_distill"};
    return names;
  }
};

}  // namespace gapflight
