// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 on any failure.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <sstream>
#include <string>
#include <thread>

#include "gapflight/gapflight.hpp"
#include "oracles.hpp"

using namespace gapflight;
using namespace gapflight::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
  std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------------------

void integrator_order() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 20; ++i) {
    const auto prof = random_profile(rng);
    QuadrotorState s0;
    s0.position = random_vec(rng, 2.0);
    s0.velocity = random_vec(rng, 1.0);
    s0.attitude = quat_from_euler(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-kPi, kPi));
    worst = std::min(worst, rk4_convergence(prof, s0, 1.0 / 120.0, 1.0).ratio());
  }
  const double secs = seconds_since(t0);
  report("integrator_rk4_order", worst >= 8.0 && secs < 10.0,
         fmt("min error ratio %.2f over 20 profiles (>= 8), %.2f s", worst, secs));
}

// Signed distance of the cross-section to the region boundary: positive
// when some vertex lies outside. Exact for convex regions.
double decision_margin(const QuadrotorState& s, const GapSpec& g, const ColliderSpec& col) {
  double margin = -std::numeric_limits<double>::infinity();
  for (const Vec2& p : plane_cross_section(s, g, col)) {
    const double d = distance_to_boundary(g.shape, p);
    margin = std::max(margin, contains(g.shape, p) ? -d : d);
  }
  return margin;
}

void collision_oracle() {
  const auto t0 = Clock::now();
  Rng rng(202);
  const ColliderSpec col;
  const auto shapes = all_shapes();
  const long total = 100000;
  long disagree = 0, bad = 0;
  long counts[3] = {0, 0, 0};
  double worst_margin = 0.0;
  for (long i = 0; i < total; ++i) {
    const GapShape& shape = shapes[static_cast<std::size_t>(i % 6)];
    const GapSpec g = random_gap(rng, shape);
    const auto s = pose_near_gap(rng, g);
    const auto fast = clearance_check(s, g, col).classification;
    ++counts[static_cast<int>(fast)];
    const auto slow = surface_oracle(s, g, col, 41).classification;
    if (fast == slow) continue;
    ++disagree;
    const double m = std::abs(decision_margin(s, g, col));
    worst_margin = std::max(worst_margin, m);
    if (!(m <= 1e-3)) ++bad;
  }
  const double secs = seconds_since(t0);
  report("collision_oracle", bad == 0 && secs < 300.0,
         fmt("1e5 poses (free %ld, safe %ld, collision %ld), %ld disagreements, worst margin %.2e m, %.0f s",
             counts[0], counts[1], counts[2], disagree, worst_margin, secs));
}

void reward_telescoping() {
  Rng rng(303);
  const RewardConfig cfg = RewardConfig::rolled();
  const ColliderSpec col;
  double worst = 0.0;
  long collisions = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const GapSpec g = GapSpec::from_normal_roll(random_vec(rng, 3.0), random_unit(rng), rng.uniform(-kPi, kPi),
                                                Rectangle{0.6, 0.2});
    QuadrotorState s;
    s.attitude = g.frame;
    const Vec2 uv(rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02));
    double x = rng.uniform(-3.0, -0.3);
    const double end = rng.uniform(0.3, 2.0);
    s.position = g.to_world(uv) + x * g.normal();
    double sum = 0.0;
    while (x < end) {
      x += rng.uniform(-0.02, 0.08);
      TransitionSnapshot t;
      t.gap = g;
      t.prev_state = s;
      s.position = g.to_world(uv) + x * g.normal();
      t.state = s;
      t.clearance = clearance_check(s, g, col).classification;
      collisions += t.clearance == Clearance::Collision;
      sum += compute_reward(t, cfg).traversing;
    }
    worst = std::max(worst, std::abs(sum - 4.0));
  }
  report("reward_telescoping", worst <= 1e-9 && collisions == 0,
         fmt("1000 clean passes, max |sum - 4| = %.2e, collision steps %ld", worst, collisions));
}

void speed_term() {
  const CommandSetpoint a{9.81, Vec3::Zero()};
  const RewardConfig cfg = RewardConfig::rolled();
  const double at0 = smoothness_and_speed(a, a, Vec3::Zero(), cfg).speed;
  const double at4 = smoothness_and_speed(a, a, Vec3(4.0, 0.0, 0.0), cfg).speed;
  report("speed_term", std::abs(at0 - 0.049084) <= 1e-6 && at4 == 0.0,
         fmt("r(0) = %.7f, r(4) = %g", at0, at4));
}

void actuator_model() {
  bool delays_ok = true, ramps_ok = true;
  for (int h = 1; h <= 5; ++h)
    for (int w = 1; w <= 5; ++w)
      for (int ch = 0; ch < 4; ++ch) {
        ResponseParams p;
        p.delay = {1, 1, 1, 1};
        p.delay[static_cast<std::size_t>(ch)] = h;
        p.window = w;
        CommandHistory hist(32);
        hist.fill(CommandSetpoint{0.0, Vec3::Zero()});
        const int k0 = 20;
        int first_rise = -1, full = -1;
        for (int k = 0; k < 40; ++k) {
          std::array<double, 4> c{0, 0, 0, 0};
          c[static_cast<std::size_t>(ch)] = k >= k0 ? 1.0 : 0.0;
          hist.push(CommandSetpoint::from_channels(c));
          const double y = actuator_response(hist, p).channels()[static_cast<std::size_t>(ch)];
          if (first_rise < 0 && y > 0.0) first_rise = k;
          if (full < 0 && y == 1.0) full = k;
        }
        delays_ok &= first_rise - k0 == h;
        ramps_ok &= full - first_rise + 1 == w;
      }
  Rng rng(505);
  double lin = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    ResponseParams p;
    for (auto& d : p.delay) d = static_cast<int>(rng.uniform_int(1, 5));
    p.window = static_cast<int>(rng.uniform_int(1, 5));
    const std::array<double, 4> f{rng.uniform(0.9, 1.1), rng.uniform(0.9, 1.1), rng.uniform(0.9, 1.1),
                                  rng.uniform(0.9, 1.1)};
    const double alpha = rng.uniform(-3, 3), beta = rng.uniform(-3, 3);
    CommandHistory a(16), b(16), m(16);
    for (int i = 0; i < 16; ++i) {
      const CommandSetpoint x{rng.uniform(0, 20), random_vec(rng, 6)}, y{rng.uniform(0, 20), random_vec(rng, 6)};
      a.push(x);
      b.push(y);
      m.push(CommandSetpoint{alpha * x.thrust + beta * y.thrust, alpha * x.bodyrate + beta * y.bodyrate});
    }
    const auto ra = actuator_response(a, p, f).channels(), rb = actuator_response(b, p, f).channels(),
               rm = actuator_response(m, p, f).channels();
    for (std::size_t n = 0; n < 4; ++n) lin = std::max(lin, std::abs(rm[n] - (alpha * ra[n] + beta * rb[n])));
  }
  report("actuator_model", delays_ok && ramps_ok && lin <= 1e-12,
         fmt("delay exact: %s, ramp length = w: %s, linearity error %.1e", delays_ok ? "yes" : "no",
             ramps_ok ? "yes" : "no", lin));
}

void thrust_map() {
  Rng rng(606);
  double fit_err = 0.0, trip = 0.0;
  for (int i = 0; i < 20; ++i) {
    const ThrustMapParams truth{rng.uniform(0.5, 4.0), rng.uniform(0.2, 1.8), rng.uniform(0.05, 0.95)};
    std::vector<ThrustSample> data;
    for (double v = 14.0; v <= 16.81; v += 0.4)
      for (double x = 0.05; x <= 1.0; x += 0.05) data.push_back({v, x, thrust_from_throttle(x, v, truth)});
    const auto fit = fit_thrust_map(data).params;
    fit_err = std::max({fit_err, std::abs(fit.lambda1 - truth.lambda1), std::abs(fit.lambda2 - truth.lambda2),
                        std::abs(fit.lambda3 - truth.lambda3)});
    for (int k = 0; k < 100; ++k) {
      const double v = rng.uniform(14.0, 16.8), x = rng.canonical();
      trip = std::max(trip, std::abs(throttle_from_thrust(thrust_from_throttle(x, v, truth), v, truth) - x));
    }
  }
  report("thrust_map", fit_err <= 1e-6 && trip <= 1e-10,
         fmt("max parameter error %.1e, max round-trip error %.1e", fit_err, trip));
}

void informed_reset() {
  Rng rng(707);
  auto ds = std::make_shared<SeedTrajectoryDataset>();
  const TrackConfig track = presets::track("single_rect");
  for (int i = 0; i < 5; ++i) {
    const GapSpec g = sample_gap(track.gaps.front(), rng);
    ds->trajectories.push_back(generate_seed_trajectory(g, Vec3(-3.5, rng.uniform(-1, 1), 1.5), rng));
  }
  EpisodeConfig cfg;
  cfg.track = track;
  Env env(cfg, ds);
  long from_buffer = 0;
  const long n = 10000;
  for (long i = 0; i < n; ++i) from_buffer += env.reset(static_cast<std::uint64_t>(i) + 1).info.reset_from_buffer;
  const double frac = static_cast<double>(from_buffer) / n;
  report("informed_reset", std::abs(frac - 0.5) <= 0.02, fmt("buffer fraction %.4f over 1e4 resets", frac));
}

void perturbation() {
  Rng rng(808);
  PerturbationConfig cfg;
  long spawns_ineligible = 0;
  PerturbationState p;
  for (long i = 0; i < 1000000; ++i) {
    QuadrotorState s;
    double xg;
    if (i % 2 == 0) {
      xg = rng.uniform(-1.5, 1.5);
      s.bodyrate = random_vec(rng, 1.0);
    } else {
      xg = rng.uniform(-5.0, -1.6);
      s.bodyrate = random_unit(rng) * rng.uniform(3.0, 8.0);
    }
    p = maybe_spawn_perturbation(rng, s, xg, PerturbationState{}, cfg);
    spawns_ineligible += p.active;
  }
  long spawns = 0;
  const long n = 1000000;
  for (long i = 0; i < n; ++i) {
    QuadrotorState s;
    s.bodyrate = random_vec(rng, 1.5);
    spawns += maybe_spawn_perturbation(rng, s, rng.uniform(-5.0, -1.51), PerturbationState{}, cfg).active;
  }
  const double rate = static_cast<double>(spawns) / n;
  report("perturbation_eligibility", spawns_ineligible == 0 && std::abs(rate - 0.1) <= 0.005,
         fmt("ineligible spawns %ld / 1e6, eligible rate %.4f", spawns_ineligible, rate));
}

void mask_rendering() {
  Rng rng(909);
  const CameraModel cam;
  long bad_poses = 0, mismatches = 0, checked = 0;
  for (int i = 0; i < 500; ++i) {
    const GapSpec g = GapSpec::from_normal_roll(Vec3(rng.uniform(1.5, 6.0), 0.0, 1.5), Vec3::UnitX(),
                                                rng.uniform(-kPi / 2, kPi / 2),
                                                Rectangle{rng.uniform(0.3, 1.0), rng.uniform(0.2, 0.6)});
    QuadrotorState s;
    s.position = Vec3(0.0, rng.uniform(-0.3, 0.3), 1.5 + rng.uniform(-0.3, 0.3));
    s.attitude = quat_from_euler(rng.uniform(-0.3, 0.3), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
    const auto c = check_rect_projection(render_mask(s, g, cam), s, g, cam, 1.0);
    bad_poses += !c.all_in_front;
    mismatches += c.mismatches;
    checked += c.checked;
  }
  long nonempty = 0;
  for (const auto& shape : all_shapes()) {
    QuadrotorState s;
    s.position = Vec3(0, 0, 1.5);
    const GapSpec behind = GapSpec::from_normal_roll(Vec3(-3, 0, 1.5), Vec3::UnitX(), 0.0, shape);
    const GapSpec aside = GapSpec::from_normal_roll(Vec3(3, 8, 1.5), Vec3::UnitX(), 0.0, shape);
    const GapSpec above = GapSpec::from_normal_roll(Vec3(2, 0, 8), Vec3::UnitX(), 0.0, shape);
    for (const auto* g : {&behind, &aside, &above}) nonempty += !render_mask(s, *g, cam).empty_mask();
  }
  report("mask_rendering", bad_poses == 0 && mismatches == 0 && nonempty == 0,
         fmt("500 poses, %ld pixels checked, %ld mismatches beyond 1 px; %ld non-empty hidden cases", checked,
             mismatches, nonempty));
}

void baseline_monte_carlo() {
  const auto t0 = Clock::now();
  std::vector<McCell> grid;
  for (double eps : {0.0, 1.0, 2.0, 4.0}) grid.push_back({eps, 0.005, 2.5, 0.0});
  const int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto res = monte_carlo_success(grid, 200, BaselineConfig{}, 0, workers);
  bool trend = true;
  std::string rates;
  for (std::size_t i = 0; i < res.size(); ++i) {
    rates += fmt("%s%.3f", i ? " " : "", res[i].success_rate);
    if (i > 0 && !(res[i].success_rate <= res[i - 1].success_rate || res[i].ci.lo <= res[i - 1].ci.hi)) trend = false;
  }
  std::vector<McCell> zero{{0.0, 0.0, 2.5, 0.0}};
  const auto z = monte_carlo_success(zero, 200, BaselineConfig{}, 1, workers);
  const double secs = seconds_since(t0);
  report("baseline_monte_carlo", trend && z[0].success_rate == 1.0 && secs < 900.0,
         fmt("rates over eps {0,1,2,4}: %s; zero-noise %.3f; %.0f s", rates.c_str(), z[0].success_rate, secs));
}

std::string rollout_log(Env& env, std::uint64_t seed, std::size_t episode) {
  std::ostringstream out;
  Rng act(mix_seed(seed, 0xac7));
  const double dt = env.config().dynamics.control_period;
  StepResult r = env.reset(seed);
  write_step_record(out, episode, r, dt);
  while (!r.done) {
    r = env.step(CommandSetpoint{act.uniform(6, 20), random_vec(act, 4.0)});
    write_step_record(out, episode, r, dt);
  }
  return out.str();
}

void determinism() {
  EpisodeConfig cfg;
  cfg.track = presets::track("track4");
  cfg.observation = ObservationKind::Mask;
  cfg.horizon = 120;
  bool single = true;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Env a(cfg), b(cfg);
    single &= rollout_log(a, seed, 0) == rollout_log(b, seed, 0);
  }

  const std::size_t K = 4;
  auto batched = [&](int workers) {
    BatchEnv batch(cfg, K, workers);
    std::vector<std::uint64_t> seeds{11, 12, 13, 14};
    std::vector<std::ostringstream> logs(K);
    std::vector<Rng> act;
    for (auto s : seeds) act.emplace_back(mix_seed(s, 0xac7));
    const auto first = batch.reset(seeds);
    const double dt = cfg.dynamics.control_period;
    for (std::size_t i = 0; i < K; ++i) write_step_record(logs[i], i, first[i], dt);
    std::vector<bool> finished(K, false);
    for (int k = 0; k < cfg.horizon; ++k) {
      std::vector<CommandSetpoint> actions(K);
      for (std::size_t i = 0; i < K; ++i) actions[i] = CommandSetpoint{act[i].uniform(6, 20), random_vec(act[i], 4.0)};
      const auto res = batch.step(actions);
      for (std::size_t i = 0; i < K; ++i) {
        if (finished[i]) continue;
        write_step_record(logs[i], i, res[i].step, dt);
        finished[i] = res[i].step.done;
      }
    }
    std::vector<std::string> out;
    for (auto& l : logs) out.push_back(l.str());
    return out;
  };
  const auto one = batched(1), many = batched(4);
  bool batch_ok = one == many;
  for (std::size_t i = 0; i < K; ++i) {
    Env env(cfg);
    batch_ok &= rollout_log(env, 11 + i, i) == one[i];
  }
  report("determinism", single && batch_ok,
         fmt("single-env repeat identical: %s; batched (1 vs 4 workers, and vs single env) identical: %s",
             single ? "yes" : "no", batch_ok ? "yes" : "no"));
}

}  // namespace

int main() {
  integrator_order();
  collision_oracle();
  reward_telescoping();
  speed_term();
  actuator_model();
  thrust_map();
  informed_reset();
  perturbation();
  mask_rendering();
  baseline_monte_carlo();
  determinism();
  std::printf("%d failing criteria\n", failures);
  return failures == 0 ? 0 : 1;
}
