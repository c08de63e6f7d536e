#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gapflight/clearance.hpp"
#include "gapflight/io/json_io.hpp"
#include "gapflight/planner.hpp"

namespace gapflight {

struct TrajectorySample {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Quat attitude = Quat::Identity();

  QuadrotorState state() const { return {position, velocity, attitude, Vec3::Zero()}; }

  bool operator==(const TrajectorySample& o) const {
    return t == o.t && position == o.position && velocity == o.velocity &&
           attitude.coeffs() == o.attitude.coeffs();
  }
};

/// States along one planned path plus the gap poses it was planned for.
struct SeedTrajectory {
  std::vector<GapSpec> gaps;
  std::vector<TrajectorySample> samples;
};

struct SeedTrajectoryDataset {
  std::vector<SeedTrajectory> trajectories;

  bool empty() const { return trajectories.empty(); }
  std::size_t size() const { return trajectories.size(); }
};

inline bool same_gap(const GapSpec& a, const GapSpec& b) {
  return a.center == b.center && a.frame.coeffs() == b.frame.coeffs() &&
         io::shape_to_json(a.shape) == io::shape_to_json(b.shape);
}

inline bool operator==(const SeedTrajectory& a, const SeedTrajectory& b) {
  if (a.samples != b.samples || a.gaps.size() != b.gaps.size()) return false;
  for (std::size_t i = 0; i < a.gaps.size(); ++i)
    if (!same_gap(a.gaps[i], b.gaps[i])) return false;
  return true;
}

inline bool operator==(const SeedTrajectoryDataset& a, const SeedTrajectoryDataset& b) {
  return a.trajectories == b.trajectories;
}

namespace io {

inline Json trajectory_to_json(const SeedTrajectory& tr) {
  Json gaps = Json::array();
  for (const auto& g : tr.gaps) gaps.push_back(gap_to_json(g));
  Json samples = Json::array();
  for (const auto& s : tr.samples)
    samples.push_back({{"t", s.t},
                       {"p", to_json(s.position)},
                       {"v", to_json(s.velocity)},
                       {"q", to_json(s.attitude)}});
  return {{"gaps", gaps}, {"samples", samples}};
}

inline SeedTrajectory trajectory_from_json(const Json& j, const std::string& path) {
  SeedTrajectory tr;
  const Json& gaps = require(j, "gaps", path);
  const std::string gp = join_path(path, "gaps");
  if (!gaps.is_array() || gaps.empty()) throw ConfigError(gp, "expected a non-empty array");
  for (std::size_t i = 0; i < gaps.size(); ++i)
    tr.gaps.push_back(gap_from_json(gaps[i], index_path(gp, i)));

  const Json& samples = require(j, "samples", path);
  const std::string sp = join_path(path, "samples");
  if (!samples.is_array() || samples.empty()) throw ConfigError(sp, "expected a non-empty array");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string p = index_path(sp, i);
    const Json& s = samples[i];
    TrajectorySample out;
    out.t = number_field(s, "t", p);
    out.position = get_vec3(require(s, "p", p), join_path(p, "p"));
    out.velocity = get_vec3(require(s, "v", p), join_path(p, "v"));
    out.attitude = get_quat(require(s, "q", p), join_path(p, "q"));
    if (!tr.samples.empty() && !(out.t > tr.samples.back().t))
      throw ConfigError(join_path(p, "t"), "timestamps must be strictly increasing");
    tr.samples.push_back(out);
  }
  return tr;
}

}  // namespace io

/// One JSON object per line; blank lines are ignored.
inline SeedTrajectoryDataset load_seed_dataset(std::istream& in) {
  SeedTrajectoryDataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ConfigError(where, std::string("invalid JSON: ") + e.what());
    }
    try {
      ds.trajectories.push_back(io::trajectory_from_json(j, ""));
    } catch (const ConfigError& e) {
      throw e.within(where);
    }
  }
  return ds;
}

inline SeedTrajectoryDataset load_seed_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open dataset file");
  try {
    return load_seed_dataset(in);
  } catch (const ConfigError& e) {
    throw e.within(path);
  }
}

inline void save_seed_dataset(std::ostream& out, const SeedTrajectoryDataset& ds) {
  for (const auto& tr : ds.trajectories) out << io::trajectory_to_json(tr).dump() << '\n';
}

inline void save_seed_dataset(const std::string& path, const SeedTrajectoryDataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  save_seed_dataset(out, ds);
}

struct SeedGeneratorConfig {
  double sample_period = 1.0 / 60.0;
  Interval crossing_speed{1.5, 3.0};  // m/s along the normal
  double pre_distance = 0.6;          // straight segment starts this far before the plane
  double post_distance = 0.6;         // and ends this far past it
  Interval stop_distance{0.8, 1.5};   // deceleration length after the straight segment
  FeasibilityLimits limits;
  int max_attempts = 20;
  ColliderSpec collider;
};

class SeedGenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double smooth_unit(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

}  // namespace detail

/// Stand-in for an offline trajectory optimizer: rest -> min-jerk approach
/// -> straight constant-velocity crossing through the passable center with
/// the attitude matched to the gap -> min-jerk stop. Attitude is blended by
/// slerp during the curved segments.
inline SeedTrajectory generate_seed_trajectory(const GapSpec& gap, const Vec3& start, Rng& rng,
                                               const SeedGeneratorConfig& cfg = {}) {
  const Vec3 n = gap.normal();
  const Vec3 center = gap.passable_center();
  if (!(gap_coordinate(start, gap) < -cfg.pre_distance))
    throw std::invalid_argument("generate_seed_trajectory: start must lie before the gap");

  const Quat cross_q = quat_from_euler(gap.roll(), gap.pitch(), gap.yaw());
  const Quat level_q = quat_from_euler(0.0, 0.0, gap.yaw());

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const double vc = cfg.crossing_speed.sample(rng);
    const double stop = cfg.stop_distance.sample(rng);
    const Vec3 p1 = center - cfg.pre_distance * n;
    const Vec3 p2 = center + cfg.post_distance * n;
    const Vec3 p3 = p2 + stop * n;

    const KinematicState s0{start, Vec3::Zero(), Vec3::Zero()};
    const KinematicState s1{p1, vc * n, Vec3::Zero()};
    const KinematicState s2{p2, vc * n, Vec3::Zero()};
    const KinematicState s3{p3, Vec3::Zero(), Vec3::Zero()};

    auto fit = [&](const KinematicState& a, const KinematicState& b, double guess) {
      return sample_execution_time(guess, [&](double T) {
        return feasibility_check(min_jerk_trajectory(a, b, T), cfg.limits);
      });
    };
    const auto T1 = fit(s0, s1, 2.0 * (p1 - start).norm() / vc);
    const auto T3 = fit(s2, s3, 2.0 * stop / vc);
    if (!T1 || !T3) continue;
    const auto seg1 = min_jerk_trajectory(s0, s1, *T1);
    const auto seg3 = min_jerk_trajectory(s2, s3, *T3);
    const double T2 = (p2 - p1).norm() / vc;
    const double total = *T1 + T2 + *T3;

    SeedTrajectory tr;
    tr.gaps = {gap};
    bool ok = true;
    const auto count = static_cast<long>(std::floor(total / cfg.sample_period + 1e-9));
    for (long k = 0; k <= count && ok; ++k) {
      const double t = k * cfg.sample_period;
      TrajectorySample s;
      s.t = t;
      if (t <= *T1) {
        s.position = seg1.position(t);
        s.velocity = seg1.velocity(t);
        s.attitude = level_q.slerp(detail::smooth_unit(t / *T1), cross_q);
      } else if (t <= *T1 + T2) {
        const double tau = t - *T1;
        s.position = p1 + vc * tau * n;
        s.velocity = vc * n;
        s.attitude = cross_q;
      } else {
        const double tau = std::min(t - *T1 - T2, *T3);
        s.position = seg3.position(tau);
        s.velocity = seg3.velocity(tau);
        s.attitude = cross_q.slerp(detail::smooth_unit(tau / *T3), level_q);
      }
      s.attitude.normalize();
      if (clearance_check(s.state(), gap, cfg.collider).classification == Clearance::Collision)
        ok = false;
      tr.samples.push_back(s);
    }
    if (ok) return tr;
  }
  throw SeedGenerationError("no collision-free seed trajectory after " +
                            std::to_string(cfg.max_attempts) + " attempts");
}

}  // namespace gapflight
