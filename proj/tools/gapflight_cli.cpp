#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "gapflight/gapflight.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#ifndef GAPFLIGHT_VERSION
#define GAPFLIGHT_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using namespace gapflight;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config;
  std::uint64_t seed = 0;
  long episodes = -1;
  int workers = 1;
  std::string out = "out";
  std::string preset;
};

struct Loaded {
  RunConfig run;
  std::shared_ptr<const SeedTrajectoryDataset> dataset;
  std::string dataset_path;
};

Loaded load(const CommonOptions& o) {
  Loaded l;
  if (!o.config.empty()) {
    if (!fs::exists(o.config)) throw ConfigError(o.config, "config file not found");
    l.run = load_run_config(o.config);
  }
  if (!o.preset.empty()) {
    try {
      l.run.episode.track = presets::track(o.preset);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("--preset", e.what());
    }
  }
  if (!l.run.dataset_path.empty()) {
    fs::path p(l.run.dataset_path);
    if (p.is_relative() && !o.config.empty()) p = fs::path(o.config).parent_path() / p;
    l.dataset_path = p.string();
    l.dataset = std::make_shared<SeedTrajectoryDataset>(load_seed_dataset(l.dataset_path));
  }
  if (o.workers < 1) throw UsageError("--workers must be >= 1");
  return l;
}

std::vector<std::uint64_t> episode_seeds(std::uint64_t seed, std::size_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = episode_seed(seed, i);
  return s;
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_manifest(const fs::path& dir, const std::string& command, const CommonOptions& o,
                    const Loaded& l, const std::vector<std::uint64_t>& seeds, Json extra = Json::object()) {
  Json m;
  m["tool"] = "gapflight_cli";
  m["version"] = GAPFLIGHT_VERSION;
  m["command"] = command;
  m["config_path"] = o.config;
  m["preset"] = o.preset;
  m["seed"] = o.seed;
  m["seeds"] = seeds;
  m["workers"] = o.workers;
  m["output_dir"] = dir.string();
  m["dataset_path"] = l.dataset_path;
  m["config"] = io::run_config_to_json(l.run);
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  write_json(dir / "run_manifest.json", m);
}

// Runs fn(i) for i in [0, n) over `workers` threads, rethrowing the first error.
template <typename F>
void fan_out(std::size_t n, int workers, F&& fn) {
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < w; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Policies

class RemotePolicy : public Policy {
 public:
  explicit RemotePolicy(const std::string& url) {
    const auto scheme = url.find("://");
    const auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    base_ = slash == std::string::npos ? url : url.substr(0, slash);
    path_ = slash == std::string::npos ? "/act" : url.substr(slash);
  }

  CommandSetpoint act(const Env& env, const StepResult& last) override {
    std::vector<double> oracle;
    append_oracle(oracle, last.observation);
    Json body = {{"protocol_version", kProtocolVersion}, {"obs", oracle}, {"step", last.step}};
    if (last.observation.mask) {
      const auto& m = *last.observation.mask;
      body["mask"] = encode_array(m.pixels, {static_cast<std::size_t>(m.height), static_cast<std::size_t>(m.width)});
    }
    httplib::Client cli(base_);
    cli.set_read_timeout(60, 0);
    auto res = cli.Post(path_, body.dump(), "application/json");
    if (!res) throw std::runtime_error("policy server " + base_ + path_ + " unreachable");
    if (res->status != 200)
      throw std::runtime_error("policy server returned status " + std::to_string(res->status));
    const Json reply = Json::parse(res->body);
    const auto a = io::get_array<4>(reply.at("action"), "action");
    (void)env;
    return CommandSetpoint::from_channels(a);
  }

 private:
  std::string base_;
  std::string path_;
};

std::unique_ptr<Policy> policy_from(const std::string& spec) {
  if (spec.rfind("http://", 0) == 0) return std::make_unique<RemotePolicy>(spec);
  try {
    return make_policy(spec);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string(e.what()) + " (expected hover, random, approach or an http:// URL)");
  }
}

struct EpisodeSummary {
  std::size_t episode = 0;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::Running;
  long steps = 0;
  double ret = 0.0;
  int gaps_passed = 0;
};

Json summary_json(const std::vector<EpisodeSummary>& eps) {
  std::size_t success = 0, collision = 0, timeout = 0;
  Json rows = Json::array();
  for (const auto& e : eps) {
    success += e.outcome == Outcome::Success;
    collision += e.outcome == Outcome::Collision;
    timeout += e.outcome == Outcome::Timeout;
    rows.push_back({{"episode", e.episode}, {"seed", e.seed}, {"outcome", to_string(e.outcome)},
                    {"steps", e.steps}, {"return", e.ret}, {"gaps_passed", e.gaps_passed}});
  }
  const auto ci = wilson_interval(success, eps.size());
  return {{"episodes", eps.size()},
          {"success", success},
          {"collision", collision},
          {"timeout", timeout},
          {"success_rate", eps.empty() ? 0.0 : static_cast<double>(success) / eps.size()},
          {"ci_lo", ci.lo},
          {"ci_hi", ci.hi},
          {"per_episode", rows}};
}

// ---------------------------------------------------------------------------
// Commands

int cmd_rollout(const CommonOptions& o, const std::string& policy_spec) {
  const Loaded l = load(o);
  policy_from(policy_spec);  // validate before any output
  const std::size_t n = static_cast<std::size_t>(o.episodes < 0 ? 10 : o.episodes);
  const auto seeds = episode_seeds(o.seed, n);
  const fs::path dir(o.out);
  fs::create_directories(dir / "episodes");

  std::vector<EpisodeSummary> summaries(n);
  const double dt = l.run.episode.dynamics.control_period;
  fan_out(n, o.workers, [&](std::size_t i) {
    Env env(l.run.episode, l.dataset);
    auto policy = policy_from(policy_spec);
    policy->reset(seeds[i]);
    char name[64];
    std::snprintf(name, sizeof name, "episode_%06zu.jsonl", i);
    std::ofstream log(dir / "episodes" / name);
    if (!log) throw std::runtime_error("cannot write episode log");
    StepResult r = env.reset(seeds[i]);
    write_step_record(log, i, r, dt);
    EpisodeSummary s{i, seeds[i], Outcome::Running, 0, 0.0, 0};
    while (!r.done) {
      r = env.step(policy->act(env, r));
      write_step_record(log, i, r, dt);
      s.ret += r.reward.total;
    }
    s.outcome = r.info.outcome;
    s.steps = r.step;
    s.gaps_passed = r.info.gaps_passed;
    summaries[i] = s;
  });

  Json summary = summary_json(summaries);
  summary["policy"] = policy_spec;
  write_json(dir / "summary.json", summary);
  write_manifest(dir, "rollout", o, l, seeds, {{"policy", policy_spec}});
  std::printf("rollout: %zu episodes, %zu success, %zu collision, %zu timeout -> %s\n", n,
              summary["success"].get<std::size_t>(), summary["collision"].get<std::size_t>(),
              summary["timeout"].get<std::size_t>(), dir.string().c_str());
  return 0;
}

int cmd_evaluate(const CommonOptions& o, const std::string& policy_spec, std::size_t num_envs) {
  const Loaded l = load(o);
  policy_from(policy_spec);
  const std::size_t n = static_cast<std::size_t>(o.episodes < 0 ? 20 : o.episodes);
  if (num_envs == 0) throw UsageError("--envs must be >= 1");
  const fs::path dir(o.out);
  fs::create_directories(dir);

  BatchEnv batch(l.run.episode, num_envs, o.workers, l.dataset);
  std::vector<std::unique_ptr<Policy>> policies;
  const auto seeds = episode_seeds(o.seed, num_envs);
  for (std::size_t i = 0; i < num_envs; ++i) {
    policies.push_back(policy_from(policy_spec));
    policies.back()->reset(seeds[i]);
  }
  std::vector<StepResult> last = batch.reset(seeds);
  std::vector<std::uint64_t> current_seed = seeds, episode_index(num_envs, 0);
  std::vector<double> ret(num_envs, 0.0);
  std::vector<EpisodeSummary> done;
  std::vector<std::size_t> env_of;

  // Completed episodes are collected in (step, env index) order.
  while (done.size() < n) {
    std::vector<CommandSetpoint> actions(num_envs);
    for (std::size_t i = 0; i < num_envs; ++i) actions[i] = policies[i]->act(batch.env(i), last[i]);
    const auto results = batch.step(actions);
    for (std::size_t i = 0; i < num_envs; ++i) {
      const auto& s = results[i].step;
      ret[i] += s.reward.total;
      if (!s.done) {
        last[i] = s;
        continue;
      }
      if (done.size() < n) {
        done.push_back({done.size(), current_seed[i], s.info.outcome, s.step, ret[i], s.info.gaps_passed});
        env_of.push_back(i);
      }
      ret[i] = 0.0;
      current_seed[i] = episode_seed(seeds[i], ++episode_index[i]);
      policies[i]->reset(current_seed[i]);
      last[i] = *results[i].reset;
    }
  }

  std::ofstream csv(dir / "episodes.csv");
  csv << "episode,env,seed,outcome,steps,return,gaps_passed\n";
  for (std::size_t k = 0; k < done.size(); ++k) {
    const auto& e = done[k];
    csv << e.episode << ',' << env_of[k] << ',' << e.seed << ',' << to_string(e.outcome) << ','
        << e.steps << ',' << format_double(e.ret) << ',' << e.gaps_passed << '\n';
  }
  Json summary = summary_json(done);
  summary["policy"] = policy_spec;
  summary["num_envs"] = num_envs;
  write_json(dir / "summary.json", summary);
  write_manifest(dir, "evaluate", o, l, seeds, {{"policy", policy_spec}, {"num_envs", num_envs}});
  std::printf("evaluate: %zu episodes, success rate %.3f [%.3f, %.3f]\n", n,
              summary["success_rate"].get<double>(), summary["ci_lo"].get<double>(),
              summary["ci_hi"].get<double>());
  return 0;
}

int cmd_dataset(const CommonOptions& o, long count_opt) {
  const Loaded l = load(o);
  const long count = count_opt >= 0 ? count_opt : (o.episodes >= 0 ? o.episodes : 100);
  const auto n = static_cast<std::size_t>(count);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  const TrackConfig& track = l.run.episode.track;
  const SeedGeneratorConfig gen;

  std::vector<std::optional<SeedTrajectory>> slots(n);
  std::vector<std::string> failures(n);
  fan_out(n, o.workers, [&](std::size_t i) {
    Rng rng(mix_seed(o.seed, i));
    const std::vector<GapSpec> gaps = randomize_track(track, rng);
    const GapSpec& g = gaps.front();
    Vec3 nh(g.normal().x(), g.normal().y(), 0.0);
    if (nh.norm() < 1e-9) nh = Vec3::UnitX();
    nh.normalize();
    const Vec3 yh = Vec3::UnitZ().cross(nh);
    const Vec3 r = track.start_region.sample(rng);
    Vec3 start = g.center + r.x() * nh + r.y() * yh;
    start.z() = r.z();
    try {
      slots[i] = generate_seed_trajectory(g, start, rng, gen);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });

  SeedTrajectoryDataset ds;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) ds.trajectories.push_back(std::move(*slots[i]));
    else ++failed;
  }
  save_seed_dataset((dir / "dataset.jsonl").string(), ds);
  const double rate = n == 0 ? 0.0 : static_cast<double>(failed) / n;
  write_json(dir / "summary.json", {{"requested", n}, {"generated", ds.size()}, {"failed", failed},
                                    {"failure_rate", rate}});
  write_manifest(dir, "dataset", o, l, {o.seed}, {{"count", n}});
  std::printf("dataset: %zu/%zu trajectories (failure rate %.3f) -> %s\n", ds.size(), n, rate,
              (dir / "dataset.jsonl").string().c_str());
  return 0;
}

int cmd_planner_mc(const CommonOptions& o) {
  const Loaded l = load(o);
  const PlannerMcConfig& pc = l.run.planner;
  if (pc.grid.empty()) throw ConfigError("planner_mc.grid", "scenario grid is empty");
  const std::size_t n = o.episodes >= 0 ? static_cast<std::size_t>(o.episodes) : pc.seeds;
  if (n < 1) throw UsageError("--episodes must be >= 1");
  const fs::path dir(o.out);
  fs::create_directories(dir);
  const auto results = monte_carlo_success(pc.grid, n, pc.baseline, o.seed, o.workers);
  std::ofstream csv(dir / "planner_mc.csv");
  write_mc_csv(csv, results);
  write_manifest(dir, "planner-mc", o, l, {o.seed}, {{"seeds_per_cell", n}});
  for (const auto& r : results)
    std::printf("eps=%g delta=%g x0=%g phi=%g: %.3f [%.3f, %.3f]\n", r.cell.eps, r.cell.delta, r.cell.x0,
                r.cell.phi_gap, r.success_rate, r.ci.lo, r.ci.hi);
  return 0;
}

int cmd_render_mask(const CommonOptions& o, int steps) {
  Loaded l = load(o);
  l.run.episode.observation = ObservationKind::Mask;
  const std::size_t n = static_cast<std::size_t>(o.episodes < 0 ? 1 : o.episodes);
  const auto seeds = episode_seeds(o.seed, n);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  fan_out(n, o.workers, [&](std::size_t i) {
    Env env(l.run.episode, l.dataset);
    GapApproachPolicy policy;
    StepResult r = env.reset(seeds[i]);
    for (int k = 0;; ++k) {
      char name[64];
      std::snprintf(name, sizeof name, "mask_%04zu_%04d.pgm", i, k);
      write_pgm((dir / name).string(), *r.observation.mask);
      if (k >= steps || r.done) break;
      r = env.step(policy.act(env, r));
    }
  });
  write_manifest(dir, "render-mask", o, l, seeds, {{"steps", steps}});
  std::printf("render-mask: %zu episodes -> %s\n", n, dir.string().c_str());
  return 0;
}

BindingServer* g_server = nullptr;

int cmd_serve(const CommonOptions& o, std::size_t num_envs, const std::string& host, int port) {
  const Loaded l = load(o);
  if (num_envs == 0) throw UsageError("--envs must be >= 1");
  BatchBinding binding(std::make_unique<BatchEnv>(l.run.episode, num_envs, o.workers, l.dataset));
  BindingServer server(binding);
  const int bound = server.bind(host, port);
  if (bound <= 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  std::printf("serving %s on http://%s:%d (%zu envs)\n", kProtocolVersion, host.c_str(), bound, num_envs);
  std::fflush(stdout);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  server.listen();
  g_server = nullptr;
  return 0;
}

int cmd_thrust_fit(const std::string& input) {
  if (!fs::exists(input)) throw ConfigError(input, "calibration file not found");
  std::vector<ThrustSample> samples;
  try {
    samples = read_thrust_samples_csv(input);
  } catch (const std::runtime_error& e) {
    throw ConfigError(input, e.what());
  }
  const ThrustMapFit fit = fit_thrust_map(samples);
  const Json j = {{"lambda1", fit.params.lambda1}, {"lambda2", fit.params.lambda2},
                  {"lambda3", fit.params.lambda3}, {"voltage_min", fit.params.voltage_min},
                  {"voltage_max", fit.params.voltage_max}, {"residual_rms", fit.residual_rms}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "run config (JSON)");
  cmd->add_option("--seed", o.seed, "base seed");
  cmd->add_option("--episodes", o.episodes, "number of episodes / seeds");
  cmd->add_option("--workers", o.workers, "worker threads");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--preset", o.preset, "track preset (track1..track6, single_rect, ...)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gap traversal simulator tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", GAPFLIGHT_VERSION);

  CommonOptions o;
  std::string policy = "hover";
  std::size_t envs = 4;
  long count = -1;
  int steps = 0;
  std::string host = "127.0.0.1";
  int port = 0;
  std::string input;

  auto* rollout = app.add_subcommand("rollout", "run episodes with a scripted or remote policy");
  add_common(rollout, o);
  rollout->add_option("--policy", policy, "hover | random | approach | http://host:port/act");

  auto* evaluate = app.add_subcommand("evaluate", "batched evaluation with auto-reset");
  add_common(evaluate, o);
  evaluate->add_option("--policy", policy, "hover | random | approach | http://host:port/act");
  evaluate->add_option("--envs", envs, "parallel envs in the batch");

  auto* dataset = app.add_subcommand("dataset", "generate a seed-trajectory dataset");
  add_common(dataset, o);
  dataset->add_option("--count", count, "trajectories to generate");

  auto* planner = app.add_subcommand("planner-mc", "min-jerk baseline Monte Carlo");
  add_common(planner, o);

  auto* render = app.add_subcommand("render-mask", "write observation masks as PGM");
  add_common(render, o);
  render->add_option("--steps", steps, "also render this many steps of the approach policy");

  auto* serve = app.add_subcommand("serve", "serve the batch binding over local HTTP");
  add_common(serve, o);
  serve->add_option("--envs", envs, "envs in the batch");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port (0 picks a free one)");

  auto* thrust = app.add_subcommand("thrust-fit", "fit the throttle-to-thrust map from CSV");
  thrust->add_option("--input", input, "CSV with voltage,throttle,thrust")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (o.episodes < -1 || (o.episodes == 0 && !dataset->parsed()))
      throw UsageError("--episodes must be >= 1");
    if (*rollout) return cmd_rollout(o, policy);
    if (*evaluate) return cmd_evaluate(o, policy, envs);
    if (*dataset) return cmd_dataset(o, count);
    if (*planner) return cmd_planner_mc(o);
    if (*render) return cmd_render_mask(o, steps);
    if (*serve) return cmd_serve(o, envs, host, port);
    if (*thrust) return cmd_thrust_fit(input);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
