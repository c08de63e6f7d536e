#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <map>

#include "gapflight/randomization.hpp"
#include "generators.hpp"

using namespace gapflight;
using namespace gapflight::testing;

namespace {

double chi_square_p(const std::vector<long>& counts, double expected) {
  double stat = 0.0;
  for (long c : counts) stat += (c - expected) * (c - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

QuadrotorState calm() { return QuadrotorState{}; }

}  // namespace

TEST(Perturbation, FastRotationNeverSpawns) {
  Rng rng(1);
  PerturbationConfig cfg;
  cfg.probability = 1.0;
  QuadrotorState s;
  s.bodyrate = Vec3(3.5, 0.0, 0.0);
  for (int i = 0; i < 10000; ++i) EXPECT_FALSE(maybe_spawn_perturbation(rng, s, -4.0, {}, cfg).active);
  s.bodyrate = Vec3(0.0, 3.0, 0.0);
  EXPECT_FALSE(maybe_spawn_perturbation(rng, s, -4.0, {}, cfg).active);
}

TEST(Perturbation, NearPlaneNeverSpawns) {
  Rng rng(2);
  PerturbationConfig cfg;
  cfg.probability = 1.0;
  for (double xg : {-1.0, -1.5, 0.0, 1.0, 1.5})
    for (int i = 0; i < 1000; ++i) EXPECT_FALSE(maybe_spawn_perturbation(rng, calm(), xg, {}, cfg).active);
}

TEST(Perturbation, EligibleSpawnRate) {
  Rng rng(3);
  const PerturbationConfig cfg;
  long spawns = 0;
  const long n = 100000;
  for (long i = 0; i < n; ++i) spawns += maybe_spawn_perturbation(rng, calm(), -3.0, {}, cfg).active;
  EXPECT_NEAR(spawns / double(n), 0.1, 0.005);
}

TEST(Perturbation, MagnitudesWithinBoundsWithBothSigns) {
  Rng rng(4);
  PerturbationConfig cfg;
  cfg.probability = 1.0;
  int positive[3] = {0, 0, 0};
  for (int i = 0; i < 5000; ++i) {
    const auto p = maybe_spawn_perturbation(rng, calm(), 3.0, {}, cfg);
    ASSERT_TRUE(p.active);
    EXPECT_EQ(p.remaining, 20);
    for (int k = 0; k < 3; ++k) {
      EXPECT_GT(std::abs(p.acceleration[k]), 0.0);
      EXPECT_LE(std::abs(p.acceleration[k]), cfg.max_accel[k]);
      positive[k] += p.acceleration[k] > 0;
    }
  }
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(positive[k] / 5000.0, 0.5, 0.03);
}

TEST(Perturbation, LastsTwentyStepsThenRearms) {
  Rng rng(5);
  PerturbationConfig cfg;
  cfg.probability = 1.0;
  auto p = maybe_spawn_perturbation(rng, calm(), -3.0, {}, cfg);
  const Vec3 a = p.acceleration;
  int applied = 0;
  while (p.active) {
    EXPECT_EQ(p.applied(), a);
    ++applied;
    p = maybe_spawn_perturbation(rng, calm(), -3.0, p, cfg);
  }
  EXPECT_EQ(applied, 20);
  EXPECT_EQ(p.applied(), Vec3::Zero());
  EXPECT_TRUE(maybe_spawn_perturbation(rng, calm(), -3.0, p, cfg).active);
}

TEST(Perturbation, CancelledNearPlane) {
  Rng rng(6);
  PerturbationConfig cfg;
  cfg.probability = 1.0;
  auto p = maybe_spawn_perturbation(rng, calm(), -3.0, {}, cfg);
  p = maybe_spawn_perturbation(rng, calm(), -1.4, p, cfg);
  EXPECT_FALSE(p.active);
}

TEST(Perturbation, DisabledNeverSpawns) {
  Rng rng(7);
  PerturbationConfig cfg;
  cfg.enabled = false;
  cfg.probability = 1.0;
  EXPECT_FALSE(maybe_spawn_perturbation(rng, calm(), -3.0, {}, cfg).active);
  cfg.probability = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(ResponseRandomization, ZeroRangeGivesUnitFactors) {
  Rng rng(8);
  ResponseRandomizationConfig cfg;
  cfg.factor_range = {0.0, 0.0, 0.0, 0.0};
  for (int i = 0; i < 100; ++i) {
    const auto r = sample_response_randomization(rng, cfg, ResponseParams{});
    for (double c : r.factors) EXPECT_EQ(c, 1.0);
  }
}

TEST(ResponseRandomization, FactorsWithinRange) {
  Rng rng(9);
  ResponseRandomizationConfig cfg;
  cfg.factor_range = {0.1, 0.2, 0.05, 0.3};
  for (int i = 0; i < 10000; ++i) {
    const auto r = sample_response_randomization(rng, cfg, ResponseParams{});
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_GE(r.factors[k], 1.0 - cfg.factor_range[k]);
      EXPECT_LE(r.factors[k], 1.0 + cfg.factor_range[k]);
    }
  }
}

TEST(ResponseRandomization, HoldIsUniform) {
  Rng rng(10);
  const ResponseRandomizationConfig cfg;
  std::vector<long> counts(61, 0);
  const long n = 100000;
  for (long i = 0; i < n; ++i) {
    const int h = sample_response_randomization(rng, cfg, ResponseParams{}).hold;
    ASSERT_GE(h, 30);
    ASSERT_LE(h, 90);
    ++counts[static_cast<std::size_t>(h - 30)];
  }
  EXPECT_GT(chi_square_p(counts, n / 61.0), 0.01);
}

TEST(ResponseRandomization, UnitDelayStaysUnit) {
  Rng rng(11);
  ResponseRandomizationConfig cfg;
  ResponseParams nominal;
  nominal.delay = {1, 1, 1, 1};
  for (int i = 0; i < 10000; ++i)
    for (int h : sample_response_randomization(rng, cfg, nominal).delay) EXPECT_EQ(h, 1);
}

TEST(ResponseRandomization, DelayRoundingDistribution) {
  // nominal 3 with 40% jitter: U(1.8, 4.2) rounds to 2, 3, 4 with
  // probabilities 0.7/2.4, 1/2.4, 0.7/2.4
  Rng rng(12);
  std::map<int, long> seen;
  const long n = 200000;
  for (long i = 0; i < n; ++i) ++seen[jitter_delay(rng, 3, 0.4)];
  ASSERT_EQ(seen.size(), 3u);
  EXPECT_NEAR(seen[2] / double(n), 0.7 / 2.4, 0.005);
  EXPECT_NEAR(seen[3] / double(n), 1.0 / 2.4, 0.005);
  EXPECT_NEAR(seen[4] / double(n), 0.7 / 2.4, 0.005);
}

TEST(ResponseRandomization, ResamplesWhenHoldExpires) {
  Rng rng(13);
  const ResponseRandomizationConfig cfg;
  auto r = sample_response_randomization(rng, cfg, ResponseParams{});
  const auto first = r;
  for (int k = 1; k < first.hold; ++k) {
    r = advance_response_randomization(rng, r, cfg, ResponseParams{});
    EXPECT_EQ(r.factors, first.factors);
    EXPECT_EQ(r.hold, first.hold - k);
  }
  r = advance_response_randomization(rng, r, cfg, ResponseParams{});
  EXPECT_NE(r.factors, first.factors);
  EXPECT_GE(r.hold, 30);
}

TEST(ResponseRandomization, DisabledIsNominal) {
  Rng rng(14);
  ResponseRandomizationConfig cfg;
  cfg.enabled = false;
  const auto r = advance_response_randomization(rng, {}, cfg, ResponseParams{});
  EXPECT_EQ(r.factors, (std::array<double, 4>{1, 1, 1, 1}));
  EXPECT_EQ(r.delay, ResponseParams{}.delay);
}

TEST(Drag, ZeroStaysZero) {
  Rng rng(15);
  const auto d = randomize_drag(rng, DragParams::none());
  EXPECT_EQ(d.linear, Vec3::Zero());
  EXPECT_EQ(d.quadratic, Vec3::Zero());
}

TEST(Drag, RangeAndMean) {
  Rng rng(16);
  const DragParams nominal;
  Vec3 sum_lin = Vec3::Zero(), sum_quad = Vec3::Zero();
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto d = randomize_drag(rng, nominal);
    for (int k = 0; k < 3; ++k) {
      ASSERT_GE(d.linear[k], 0.5 * nominal.linear[k]);
      ASSERT_LE(d.linear[k], 1.5 * nominal.linear[k]);
      ASSERT_GE(d.quadratic[k], 0.5 * nominal.quadratic[k]);
      ASSERT_LE(d.quadratic[k], 1.5 * nominal.quadratic[k]);
    }
    sum_lin += d.linear;
    sum_quad += d.quadratic;
  }
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(sum_lin[k] / n / nominal.linear[k], 1.0, 0.01);
    EXPECT_NEAR(sum_quad[k] / n / nominal.quadratic[k], 1.0, 0.01);
  }
}

TEST(Presets, KnownNamesAndValues) {
  for (const auto& name : RandomizationConfig::preset_names()) {
    const auto c = RandomizationConfig::preset(name);
    EXPECT_EQ(c.name, name);
    EXPECT_NO_THROW(c.validate());
  }
  EXPECT_EQ(RandomizationConfig::preset("consecutive_distill").perturbation.probability, 0.05);
  EXPECT_EQ(RandomizationConfig::preset("single_distill").perturbation.max_accel.x(), 1.5);
  EXPECT_EQ(RandomizationConfig::preset("single_rl").perturbation.max_accel, Vec3(2.0, 1.0, 1.0));
  EXPECT_FALSE(RandomizationConfig::none().perturbation.enabled);
  EXPECT_THROW(RandomizationConfig::preset("bogus"), std::invalid_argument);
}
