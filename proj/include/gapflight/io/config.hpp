#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gapflight/baseline.hpp"
#include "gapflight/environment.hpp"
#include "gapflight/io/json_io.hpp"

namespace gapflight {

struct PlannerMcConfig {
  std::vector<McCell> grid;
  std::size_t seeds = 200;
  BaselineConfig baseline;
};

/// Everything a CLI run reads from the config file.
struct RunConfig {
  EpisodeConfig episode;
  std::string dataset_path;  // optional seed-trajectory dataset
  PlannerMcConfig planner;
};

namespace io {

inline void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(join_path(path, it.key()), "unknown field");
}

inline int int_or(const Json& obj, const std::string& key, int fallback, const std::string& path) {
  const long long v = integer_or(obj, key, fallback, path);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(join_path(path, key), "integer out of range");
  return static_cast<int>(v);
}

inline Vec3 vec3_or(const Json& obj, const std::string& key, const Vec3& fallback, const std::string& path) {
  return obj.contains(key) ? get_vec3(obj.at(key), join_path(path, key)) : fallback;
}

template <std::size_t N>
std::array<double, N> array_or(const Json& obj, const std::string& key, const std::array<double, N>& fallback,
                               const std::string& path) {
  return obj.contains(key) ? get_array<N>(obj.at(key), join_path(path, key)) : fallback;
}

inline RandomizationConfig randomization_from_json(const Json& j, const std::string& path) {
  auto preset = [&](const std::string& name, const std::string& where) {
    try {
      return RandomizationConfig::preset(name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where, e.what());
    }
  };
  if (j.is_string()) return preset(j.get<std::string>(), path);
  check_keys(j, {"preset", "perturbation", "response", "drag", "mask_noise", "focal_scale_range"}, path);
  RandomizationConfig c = preset(string_or(j, "preset", "none", path), join_path(path, "preset"));
  if (j.contains("preset")) c.name = j.at("preset").get<std::string>();
  if (j.contains("perturbation")) {
    const std::string p = join_path(path, "perturbation");
    const Json& o = j.at("perturbation");
    check_keys(o, {"enabled", "probability", "max_accel", "duration", "min_distance", "max_bodyrate"}, p);
    auto& q = c.perturbation;
    q.enabled = bool_or(o, "enabled", q.enabled, p);
    q.probability = number_or(o, "probability", q.probability, p);
    q.max_accel = vec3_or(o, "max_accel", q.max_accel, p);
    q.duration = int_or(o, "duration", q.duration, p);
    q.min_distance = number_or(o, "min_distance", q.min_distance, p);
    q.max_bodyrate = number_or(o, "max_bodyrate", q.max_bodyrate, p);
  }
  if (j.contains("response")) {
    const std::string p = join_path(path, "response");
    const Json& o = j.at("response");
    check_keys(o, {"enabled", "factor_range", "hold_min", "hold_max", "thrust_delay_jitter",
                   "bodyrate_delay_jitter"}, p);
    auto& r = c.response;
    r.enabled = bool_or(o, "enabled", r.enabled, p);
    r.factor_range = array_or<4>(o, "factor_range", r.factor_range, p);
    r.hold_min = int_or(o, "hold_min", r.hold_min, p);
    r.hold_max = int_or(o, "hold_max", r.hold_max, p);
    r.thrust_delay_jitter = number_or(o, "thrust_delay_jitter", r.thrust_delay_jitter, p);
    r.bodyrate_delay_jitter = number_or(o, "bodyrate_delay_jitter", r.bodyrate_delay_jitter, p);
  }
  if (j.contains("drag")) {
    const std::string p = join_path(path, "drag");
    const Json& o = j.at("drag");
    check_keys(o, {"enabled", "scale"}, p);
    c.drag.enabled = bool_or(o, "enabled", c.drag.enabled, p);
    c.drag.scale = number_or(o, "scale", c.drag.scale, p);
  }
  c.mask_noise = bool_or(j, "mask_noise", c.mask_noise, path);
  c.focal_scale_range = number_or(j, "focal_scale_range", c.focal_scale_range, path);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return c;
}

inline Json randomization_to_json(const RandomizationConfig& c) {
  const auto& p = c.perturbation;
  const auto& r = c.response;
  return {{"preset", c.name},
          {"perturbation",
           {{"enabled", p.enabled}, {"probability", p.probability}, {"max_accel", to_json(p.max_accel)},
            {"duration", p.duration}, {"min_distance", p.min_distance}, {"max_bodyrate", p.max_bodyrate}}},
          {"response",
           {{"enabled", r.enabled}, {"factor_range", r.factor_range}, {"hold_min", r.hold_min},
            {"hold_max", r.hold_max}, {"thrust_delay_jitter", r.thrust_delay_jitter},
            {"bodyrate_delay_jitter", r.bodyrate_delay_jitter}}},
          {"drag", {{"enabled", c.drag.enabled}, {"scale", c.drag.scale}}},
          {"mask_noise", c.mask_noise},
          {"focal_scale_range", c.focal_scale_range}};
}

inline RewardMode reward_mode_from(const std::string& s, const std::string& path) {
  if (s == "rolled") return RewardMode::Rolled;
  if (s == "pitched") return RewardMode::Pitched;
  throw ConfigError(path, "reward mode must be 'rolled' or 'pitched'");
}

inline RewardConfig reward_from_json(const Json& j, const std::string& path) {
  if (j.is_string()) return RewardConfig::for_mode(reward_mode_from(j.get<std::string>(), path));
  check_keys(j, {"mode", "traverse_weight", "traverse_band", "pitch_scale_deg", "shaping_weight",
                 "magnitude_weights", "variation_weights", "speed_weight", "speed_limit",
                 "distill_weight", "approach_distance", "velocity_weight", "pitch_weight",
                 "yaw_weight"}, path);
  RewardConfig c = RewardConfig::for_mode(
      reward_mode_from(string_or(j, "mode", "rolled", path), join_path(path, "mode")));
  c.traverse_weight = number_or(j, "traverse_weight", c.traverse_weight, path);
  c.traverse_band = number_or(j, "traverse_band", c.traverse_band, path);
  c.pitch_scale = deg2rad(number_or(j, "pitch_scale_deg", rad2deg(c.pitch_scale), path));
  c.shaping_weight = number_or(j, "shaping_weight", c.shaping_weight, path);
  c.magnitude_weights = array_or<4>(j, "magnitude_weights", c.magnitude_weights, path);
  c.variation_weights = array_or<4>(j, "variation_weights", c.variation_weights, path);
  c.speed_weight = number_or(j, "speed_weight", c.speed_weight, path);
  c.speed_limit = number_or(j, "speed_limit", c.speed_limit, path);
  c.distill_weight = number_or(j, "distill_weight", c.distill_weight, path);
  c.approach_distance = number_or(j, "approach_distance", c.approach_distance, path);
  c.velocity_weight = number_or(j, "velocity_weight", c.velocity_weight, path);
  c.pitch_weight = number_or(j, "pitch_weight", c.pitch_weight, path);
  c.yaw_weight = number_or(j, "yaw_weight", c.yaw_weight, path);
  for (double w : c.magnitude_weights)
    if (w < 0.0) throw ConfigError(join_path(path, "magnitude_weights"), "weights must be >= 0");
  for (double w : c.variation_weights)
    if (w < 0.0) throw ConfigError(join_path(path, "variation_weights"), "weights must be >= 0");
  for (double w : {c.traverse_weight, c.shaping_weight, c.speed_weight, c.distill_weight,
                   c.velocity_weight, c.pitch_weight, c.yaw_weight})
    if (w < 0.0) throw ConfigError(path, "reward weights must be >= 0");
  if (!(c.traverse_band > 0.0) || !(c.approach_distance > 0.0) || !(c.pitch_scale > 0.0))
    throw ConfigError(path, "traverse_band, approach_distance and pitch_scale_deg must be > 0");
  return c;
}

inline Json reward_to_config_json(const RewardConfig& c) {
  return {{"mode", c.mode == RewardMode::Rolled ? "rolled" : "pitched"},
          {"traverse_weight", c.traverse_weight}, {"traverse_band", c.traverse_band},
          {"pitch_scale_deg", rad2deg(c.pitch_scale)}, {"shaping_weight", c.shaping_weight},
          {"magnitude_weights", c.magnitude_weights}, {"variation_weights", c.variation_weights},
          {"speed_weight", c.speed_weight}, {"speed_limit", c.speed_limit},
          {"distill_weight", c.distill_weight}, {"approach_distance", c.approach_distance},
          {"velocity_weight", c.velocity_weight}, {"pitch_weight", c.pitch_weight},
          {"yaw_weight", c.yaw_weight}};
}

inline CameraModel camera_from_json(const Json& j, const std::string& path) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "default") return CameraModel{};
    if (s == "baseline") return CameraModel::baseline();
    throw ConfigError(path, "camera preset must be 'default' or 'baseline'");
  }
  check_keys(j, {"preset", "hfov_deg", "vfov_deg", "width", "height", "max_range", "frame_border"}, path);
  CameraModel c = j.contains("preset") ? camera_from_json(j.at("preset"), join_path(path, "preset"))
                                       : CameraModel{};
  c.hfov_deg = number_or(j, "hfov_deg", c.hfov_deg, path);
  c.vfov_deg = number_or(j, "vfov_deg", c.vfov_deg, path);
  c.width = int_or(j, "width", c.width, path);
  c.height = int_or(j, "height", c.height, path);
  c.max_range = number_or(j, "max_range", c.max_range, path);
  c.frame_border = number_or(j, "frame_border", c.frame_border, path);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return c;
}

inline Json camera_to_json(const CameraModel& c) {
  return {{"hfov_deg", c.hfov_deg}, {"vfov_deg", c.vfov_deg}, {"width", c.width},
          {"height", c.height}, {"max_range", c.max_range}, {"frame_border", c.frame_border}};
}

inline std::vector<double> number_list(const Json& j, const std::string& path) {
  if (j.is_number()) return {get_number(j, path)};
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a number or a non-empty array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_number(j[i], index_path(path, i)));
  return out;
}

/// Grid given either as explicit cells or as per-axis value lists whose
/// Cartesian product is taken (phi_gap, x0, delta, eps; eps varies fastest).
inline std::vector<McCell> grid_from_json(const Json& j, const std::string& path) {
  std::vector<McCell> grid;
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string p = index_path(path, i);
      check_keys(j[i], {"eps", "delta", "x0", "phi_gap"}, p);
      McCell c;
      c.eps = number_or(j[i], "eps", c.eps, p);
      c.delta = number_or(j[i], "delta", c.delta, p);
      c.x0 = number_or(j[i], "x0", c.x0, p);
      c.phi_gap = number_or(j[i], "phi_gap", c.phi_gap, p);
      grid.push_back(c);
    }
  } else {
    check_keys(j, {"eps", "delta", "x0", "phi_gap"}, path);
    auto list = [&](const char* key, double fallback) {
      return j.contains(key) ? number_list(j.at(key), join_path(path, key)) : std::vector<double>{fallback};
    };
    for (double phi : list("phi_gap", 0.0))
      for (double x0 : list("x0", 2.5))
        for (double delta : list("delta", 0.0))
          for (double eps : list("eps", 0.0)) grid.push_back({eps, delta, x0, phi});
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& c = grid[i];
    if (c.eps < 0.0 || c.delta < 0.0) throw ConfigError(index_path(path, i), "noise coefficients must be >= 0");
    if (!(c.x0 > 0.3)) throw ConfigError(index_path(path, i), "x0 must exceed the terminal distance (0.3 m)");
  }
  return grid;
}

inline PlannerMcConfig planner_from_json(const Json& j, const std::string& path) {
  check_keys(j, {"grid", "seeds", "bodyrate_limit", "terminal_speed", "gap"}, path);
  PlannerMcConfig c;
  if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"), join_path(path, "grid"));
  const long long seeds = integer_or(j, "seeds", static_cast<long long>(c.seeds), path);
  if (seeds < 1) throw ConfigError(join_path(path, "seeds"), "must be >= 1");
  c.seeds = static_cast<std::size_t>(seeds);
  c.baseline.limits.bodyrate_max = number_or(j, "bodyrate_limit", c.baseline.limits.bodyrate_max, path);
  c.baseline.terminal_speed = number_or(j, "terminal_speed", c.baseline.terminal_speed, path);
  if (j.contains("gap")) {
    const std::string p = join_path(path, "gap");
    check_keys(j.at("gap"), {"width", "height"}, p);
    c.baseline.gap_shape.width = number_or(j.at("gap"), "width", c.baseline.gap_shape.width, p);
    c.baseline.gap_shape.height = number_or(j.at("gap"), "height", c.baseline.gap_shape.height, p);
  }
  try {
    c.baseline.validate();
    validate(GapShape(c.baseline.gap_shape));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return c;
}

inline Json planner_to_json(const PlannerMcConfig& c) {
  Json grid = Json::array();
  for (const auto& g : c.grid)
    grid.push_back({{"eps", g.eps}, {"delta", g.delta}, {"x0", g.x0}, {"phi_gap", g.phi_gap}});
  return {{"grid", grid},
          {"seeds", c.seeds},
          {"bodyrate_limit", c.baseline.limits.bodyrate_max},
          {"terminal_speed", c.baseline.terminal_speed},
          {"gap", {{"width", c.baseline.gap_shape.width}, {"height", c.baseline.gap_shape.height}}}};
}

inline RunConfig run_config_from_json(const Json& j) {
  const std::string path;
  check_keys(j, {"track", "horizon", "observation", "num_points", "randomization", "reward", "camera",
                 "latency", "response", "drag", "collider", "action_bounds",
                 "informed_reset_probability", "ground_collision", "dataset", "planner_mc"},
             path);
  RunConfig rc;
  EpisodeConfig& e = rc.episode;
  if (j.contains("track")) e.track = track_from_json(j.at("track"), "track");
  e.horizon = int_or(j, "horizon", e.horizon, path);
  if (e.horizon <= 0) throw ConfigError("horizon", "must be > 0");
  const std::string obs = string_or(j, "observation", "points", path);
  if (obs == "points") e.observation = ObservationKind::Points;
  else if (obs == "mask") e.observation = ObservationKind::Mask;
  else throw ConfigError("observation", "must be 'points' or 'mask'");
  e.num_points = int_or(j, "num_points", e.num_points, path);
  if (e.num_points < 3) throw ConfigError("num_points", "must be >= 3");
  if (j.contains("randomization")) e.randomization = randomization_from_json(j.at("randomization"), "randomization");
  if (j.contains("reward")) e.reward = reward_from_json(j.at("reward"), "reward");
  if (j.contains("camera")) e.camera = camera_from_json(j.at("camera"), "camera");
  if (j.contains("latency")) {
    const Json& o = j.at("latency");
    check_keys(o, {"image_delay", "inference_delay"}, "latency");
    e.latency.image_delay = int_or(o, "image_delay", e.latency.image_delay, "latency");
    e.latency.inference_delay = int_or(o, "inference_delay", e.latency.inference_delay, "latency");
    if (!e.latency.valid()) throw ConfigError("latency", "delays must be >= 0");
  }
  if (j.contains("response")) {
    const Json& o = j.at("response");
    check_keys(o, {"delay", "window"}, "response");
    if (o.contains("delay")) {
      const auto d = get_array<4>(o.at("delay"), "response.delay");
      for (std::size_t i = 0; i < 4; ++i) {
        if (d[i] != std::floor(d[i]) || d[i] < 1.0)
          throw ConfigError(index_path("response.delay", i), "delays must be integers >= 1");
        e.response.delay[i] = static_cast<int>(d[i]);
      }
    }
    e.response.window = int_or(o, "window", e.response.window, "response");
    if (e.response.window < 1) throw ConfigError("response.window", "must be >= 1");
  }
  if (j.contains("drag")) {
    const Json& o = j.at("drag");
    check_keys(o, {"linear", "quadratic"}, "drag");
    e.drag.linear = vec3_or(o, "linear", e.drag.linear, "drag");
    e.drag.quadratic = vec3_or(o, "quadratic", e.drag.quadratic, "drag");
    if (!e.drag.valid()) throw ConfigError("drag", "coefficients must be >= 0");
  }
  if (j.contains("collider")) {
    const Json& o = j.at("collider");
    check_keys(o, {"half_extents"}, "collider");
    e.collider.half_extents = vec3_or(o, "half_extents", e.collider.half_extents, "collider");
    if (!e.collider.valid()) throw ConfigError("collider.half_extents", "must be > 0");
  }
  if (j.contains("action_bounds")) {
    const Json& o = j.at("action_bounds");
    check_keys(o, {"thrust_min", "thrust_max", "bodyrate_max"}, "action_bounds");
    auto& b = e.action_bounds;
    b.thrust_min = number_or(o, "thrust_min", b.thrust_min, "action_bounds");
    b.thrust_max = number_or(o, "thrust_max", b.thrust_max, "action_bounds");
    b.bodyrate_max = number_or(o, "bodyrate_max", b.bodyrate_max, "action_bounds");
    if (!(b.thrust_min < b.thrust_max) || !(b.bodyrate_max > 0.0))
      throw ConfigError("action_bounds", "need thrust_min < thrust_max and bodyrate_max > 0");
  }
  e.informed_reset_probability =
      number_or(j, "informed_reset_probability", e.informed_reset_probability, path);
  if (!(e.informed_reset_probability >= 0.0 && e.informed_reset_probability <= 1.0))
    throw ConfigError("informed_reset_probability", "must be in [0, 1]");
  e.ground_collision = bool_or(j, "ground_collision", e.ground_collision, path);
  rc.dataset_path = string_or(j, "dataset", "", path);
  if (j.contains("planner_mc")) rc.planner = planner_from_json(j.at("planner_mc"), "planner_mc");
  try {
    e.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError("", err.what());
  }
  return rc;
}

/// Fully resolved config; loading it back yields the same run.
inline Json run_config_to_json(const RunConfig& rc) {
  const EpisodeConfig& e = rc.episode;
  Json j;
  j["track"] = track_to_json(e.track);
  j["horizon"] = e.horizon;
  j["observation"] = to_string(e.observation);
  j["num_points"] = e.num_points;
  j["randomization"] = randomization_to_json(e.randomization);
  j["reward"] = reward_to_config_json(e.reward);
  j["camera"] = camera_to_json(e.camera);
  j["latency"] = {{"image_delay", e.latency.image_delay}, {"inference_delay", e.latency.inference_delay}};
  j["response"] = {{"delay", e.response.delay}, {"window", e.response.window}};
  j["drag"] = {{"linear", to_json(e.drag.linear)}, {"quadratic", to_json(e.drag.quadratic)}};
  j["collider"] = {{"half_extents", to_json(e.collider.half_extents)}};
  j["action_bounds"] = {{"thrust_min", e.action_bounds.thrust_min},
                        {"thrust_max", e.action_bounds.thrust_max},
                        {"bodyrate_max", e.action_bounds.bodyrate_max}};
  j["informed_reset_probability"] = e.informed_reset_probability;
  j["ground_collision"] = e.ground_collision;
  if (!rc.dataset_path.empty()) j["dataset"] = rc.dataset_path;
  j["planner_mc"] = planner_to_json(rc.planner);
  return j;
}

}  // namespace io

inline RunConfig parse_run_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return io::run_config_from_json(j);
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const ConfigError& e) {
    throw e.within(path);
  }
}

/// Track presets or a JSON track file.
inline TrackConfig load_track_config(const std::string& path_or_preset) {
  for (const auto& name : presets::track_names())
    if (name == path_or_preset) return presets::track(name);
  std::ifstream in(path_or_preset);
  if (!in) throw ConfigError(path_or_preset, "not a track preset and cannot open as a file");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path_or_preset, std::string("invalid JSON: ") + e.what());
  }
  try {
    return io::track_from_json(j, "");
  } catch (const ConfigError& e) {
    throw e.within(path_or_preset);
  }
}

}  // namespace gapflight
