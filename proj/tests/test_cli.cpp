#include <gtest/gtest.h>
#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include "gapflight/io/config.hpp"
#include "gapflight/thrust_map.hpp"
#include "generators.hpp"

using namespace gapflight;
using namespace gapflight::testing;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GAPFLIGHT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, UsageAndConfigErrorsExitTwo) {
  const auto dir = temp_dir("cli_errors");
  EXPECT_EQ(run_cli("rollout --config " + q(dir / "missing.json") + " --out " + q(dir / "o")), 2);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("bogus"), 2);
  EXPECT_EQ(run_cli("rollout --policy teleport --out " + q(dir / "o")), 2);
  const auto bad = write_config(dir, "bad.json", R"({"horizon": 10, "colour": "red"})");
  EXPECT_EQ(run_cli("rollout --config " + q(bad) + " --out " + q(dir / "o")), 2);
  const auto empty = write_config(dir, "empty.json", R"({"planner_mc": {"grid": []}})");
  EXPECT_EQ(run_cli("planner-mc --config " + q(empty) + " --out " + q(dir / "o")), 2);
  EXPECT_EQ(run_cli("thrust-fit --input " + q(dir / "none.csv")), 2);
  EXPECT_EQ(run_cli("--version"), 0);
}

TEST(Cli, HoverRolloutTimesOutAndIsReproducible) {
  const auto dir = temp_dir("cli_rollout");
  const auto cfg = write_config(dir, "c.json",
                                R"({"track": "easy_rect", "horizon": 90, "randomization": "single_rl"})");
  const std::string base = "rollout --policy hover --episodes 3 --seed 11 --config " + q(cfg);
  ASSERT_EQ(run_cli(base + " --out " + q(dir / "a")), 0);
  ASSERT_EQ(run_cli(base + " --workers 2 --out " + q(dir / "b")), 0);

  const Json summary = Json::parse(slurp(dir / "a" / "summary.json"));
  EXPECT_EQ(summary["episodes"], 3);
  EXPECT_EQ(summary["timeout"], 3);
  for (int i = 0; i < 3; ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "episode_%06d.jsonl", i);
    const std::string a = slurp(dir / "a" / "episodes" / name);
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir / "b" / "episodes" / name));
    std::istringstream lines(a);
    std::string line;
    int count = 0;
    Json last;
    while (std::getline(lines, line)) {
      last = Json::parse(line);
      EXPECT_EQ(last["episode"], i);
      EXPECT_EQ(last["step"], count);
      ++count;
    }
    EXPECT_EQ(count, 91);
    EXPECT_EQ(last["outcome"], "timeout");
    EXPECT_TRUE(last["done"].get<bool>());
    EXPECT_EQ(last["state"]["q"].size(), 4u);
  }
  const Json manifest = Json::parse(slurp(dir / "a" / "run_manifest.json"));
  EXPECT_EQ(manifest["command"], "rollout");
  EXPECT_EQ(manifest["seeds"].size(), 3u);
  EXPECT_EQ(manifest["config"]["horizon"], 90);
}

TEST(Cli, EvaluateWritesEpisodeTable) {
  const auto dir = temp_dir("cli_eval");
  const auto cfg = write_config(dir, "c.json", R"({"track": "easy_rect", "horizon": 30})");
  ASSERT_EQ(run_cli("evaluate --policy approach --episodes 5 --envs 2 --config " + q(cfg) + " --out " +
                    q(dir / "e")),
            0);
  std::istringstream csv(slurp(dir / "e" / "episodes.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "episode,env,seed,outcome,steps,return,gaps_passed");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 5);
}

TEST(Cli, DatasetGenerationAndReload) {
  const auto dir = temp_dir("cli_dataset");
  ASSERT_EQ(run_cli("dataset --count 0 --out " + q(dir / "zero")), 0);
  EXPECT_TRUE(fs::exists(dir / "zero" / "dataset.jsonl"));
  EXPECT_EQ(fs::file_size(dir / "zero" / "dataset.jsonl"), 0u);

  ASSERT_EQ(run_cli("dataset --count 4 --seed 3 --preset single_triangle --out " + q(dir / "four")), 0);
  const auto ds = load_seed_dataset((dir / "four" / "dataset.jsonl").string());
  const Json summary = Json::parse(slurp(dir / "four" / "summary.json"));
  EXPECT_EQ(ds.size(), summary["generated"].get<std::size_t>());
  EXPECT_GE(ds.size(), 3u);
  for (const auto& tr : ds.trajectories) {
    ASSERT_EQ(tr.gaps.size(), 1u);
    EXPECT_EQ(shape_kind(tr.gaps.front().shape), "triangle");
  }

  const auto cfg = write_config(dir, "c.json",
                                R"({"dataset": "four/dataset.jsonl", "informed_reset_probability": 1.0,
                                    "horizon": 20})");
  ASSERT_EQ(run_cli("rollout --episodes 2 --config " + q(cfg) + " --out " + q(dir / "r")), 0);
  EXPECT_EQ(Json::parse(slurp(dir / "r" / "run_manifest.json"))["dataset_path"],
            (dir / "four" / "dataset.jsonl").string());
}

TEST(Cli, PlannerMonteCarloCsv) {
  const auto dir = temp_dir("cli_mc");
  const auto cfg = write_config(dir, "c.json",
                                R"({"planner_mc": {"grid": {"eps": [0, 3], "delta": 0.01}, "seeds": 4}})");
  ASSERT_EQ(run_cli("planner-mc --seed 5 --config " + q(cfg) + " --out " + q(dir / "a")), 0);
  ASSERT_EQ(run_cli("planner-mc --seed 5 --workers 2 --config " + q(cfg) + " --out " + q(dir / "b")), 0);
  const std::string a = slurp(dir / "a" / "planner_mc.csv");
  EXPECT_EQ(a, slurp(dir / "b" / "planner_mc.csv"));
  std::istringstream in(a);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kMcCsvHeader);
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "4");
  }
  EXPECT_EQ(rows, 2);
}

TEST(Cli, RenderMaskWritesPgm) {
  const auto dir = temp_dir("cli_render");
  ASSERT_EQ(run_cli("render-mask --preset easy_rect --steps 2 --out " + q(dir / "m")), 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir / "m")) {
    if (e.path().extension() != ".pgm") continue;
    ++files;
    const std::string img = slurp(e.path());
    EXPECT_EQ(img.rfind("P5\n320 256\n255\n", 0), 0u);
    EXPECT_EQ(img.size(), std::string("P5\n320 256\n255\n").size() + 320u * 256u);
  }
  EXPECT_EQ(files, 3);
}

TEST(Cli, ThrustFitRecoversParameters) {
  const auto dir = temp_dir("cli_thrust");
  const ThrustMapParams truth{0.5, 1.2, 0.4, 14.0, 16.8};
  {
    std::ofstream out(dir / "cal.csv");
    out.precision(17);
    out << "throttle,voltage,thrust\n";
    for (double v : {14.0, 15.4, 16.8})
      for (double u = 0.1; u < 0.95; u += 0.1) out << u << ',' << v << ',' << thrust_from_throttle(u, v, truth) << '\n';
  }
  const std::string cmd = std::string(GAPFLIGHT_CLI_PATH) + " thrust-fit --input " + q(dir / "cal.csv") + " > " +
                          q(dir / "fit.json");
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  const Json fit = Json::parse(slurp(dir / "fit.json"));
  EXPECT_NEAR(fit["lambda1"].get<double>(), truth.lambda1, 1e-4);
  EXPECT_NEAR(fit["lambda2"].get<double>(), truth.lambda2, 1e-4);
  EXPECT_NEAR(fit["lambda3"].get<double>(), truth.lambda3, 1e-4);
}
