#include <gtest/gtest.h>

#include <sstream>

#include "epiopt/env.hpp"

using namespace epiopt;

namespace {

EnvConfig fixed_model_config() {
  EnvConfig c;
  c.distribution = ModelDistribution::degenerate(SeirahParams{});
  return c;
}

auto constant(Action a) {
  return [a](const Observation&) { return a; };
}

}  // namespace

TEST(Env, ResetZeroesCumulatives) {
  EpidemicEnv env(EnvConfig{});
  const auto o = env.reset(1);
  ASSERT_EQ(o.size(), 11u);
  EXPECT_EQ(o[obs::kHealthCum], 0.0);
  EXPECT_EQ(o[obs::kEcoCum], 0.0);
  EXPECT_EQ(o[obs::kLevel], 0.0);
  EXPECT_EQ(o[obs::kPrevLockdown], 0.0);
  EXPECT_EQ(o[obs::kCurrLockdown], 0.0);
}

TEST(Env, ResetWithFixedModel) {
  EpidemicEnv env(fixed_model_config());
  const auto o = env.reset(1);
  EXPECT_DOUBLE_EQ(o[obs::kS], 12'272'830.0 / 12'278'210.0);
}

TEST(Env, SameSeedSameObservation) {
  EpidemicEnv a(EnvConfig{}), b(EnvConfig{});
  EXPECT_EQ(a.reset(42), b.reset(42));
  EXPECT_NE(a.reset(42), b.reset(43));
}

TEST(Env, HorizonContract) {
  EpidemicEnv env(EnvConfig{});
  EXPECT_THROW(env.step(Action::kLockdown), std::logic_error);
  env.reset(3);
  for (int w = 1; w <= 52; ++w) {
    const auto r = env.step(w % 2 ? Action::kLockdown : Action::kNoLockdown);
    EXPECT_EQ(r.done, w == 52);
    EXPECT_EQ(r.timeout, w == 52);
  }
  EXPECT_THROW(env.step(Action::kLockdown), std::logic_error);
}

TEST(Env, LockdownBooleansAndLevel) {
  EpidemicEnv env(EnvConfig{});
  env.reset(3);
  auto r = env.step(Action::kLockdown);
  EXPECT_EQ(r.observation[obs::kPrevLockdown], 0.0);
  EXPECT_EQ(r.observation[obs::kCurrLockdown], 1.0);
  EXPECT_EQ(r.observation[obs::kLevel], 0.25);
  r = env.step(Action::kNoLockdown);
  EXPECT_EQ(r.observation[obs::kPrevLockdown], 1.0);
  EXPECT_EQ(r.observation[obs::kCurrLockdown], 0.0);
  EXPECT_EQ(r.observation[obs::kLevel], 0.0);
}

TEST(Env, NoLockdownMatchesFreeRun) {
  const auto cfg = fixed_model_config();
  EpidemicEnv env(cfg);
  rollout(env, constant(Action::kNoLockdown), 1);
  const auto free = run_free(SeirahParams{}, 364);
  EXPECT_NEAR(env.health_cum(), 0.005 * free.back().R, 1e-9 * env.health_cum());
  // Only illness-driven losses remain, small against a lockdown year.
  EXPECT_LT(env.eco_cum(), 5e9);
}

TEST(Env, PermanentLockdownCostsAboutOneFiftyBillion) {
  EpidemicEnv env(fixed_model_config());
  rollout(env, constant(Action::kLockdown), 1);
  EXPECT_NEAR(env.eco_cum(), 150e9, 15e9);
}

TEST(Env, CumulativesAreSumsOfSteps) {
  EpidemicEnv env(EnvConfig{});
  const auto recs = rollout(env, [](const Observation& o) { return o[obs::kE] > 1e-3 ? Action::kLockdown : Action::kNoLockdown; }, 9);
  double h = 0, e = 0;
  for (const auto& r : recs) {
    h += r.costs.health_step;
    e += r.costs.eco_step;
    EXPECT_NEAR(r.costs.health_cum, h, 1e-9 * std::max(1.0, h));
    EXPECT_NEAR(r.costs.eco_cum, e, 1e-9 * std::max(1.0, e));
  }
}

TEST(Env, ObservationIgnoresWeekIndex) {
  // A disease-free population stays put, so any two weeks look the same.
  EnvConfig cfg = fixed_model_config();
  cfg.distribution.means.init = InitialCounts{0, 0, 0, 0, 0};
  EpidemicEnv env(cfg);
  env.reset(0);
  const auto first = env.step(Action::kNoLockdown).observation;
  for (int w = 0; w < 20; ++w) env.step(Action::kNoLockdown);
  EXPECT_EQ(env.observe(), first);
}

TEST(Env, AggregatedExtremes) {
  for (double beta : {0.0, 1.0}) {
    EnvConfig cfg;
    cfg.goal.beta = beta;
    EpidemicEnv env(cfg);
    double agg = 0;
    Observation o = env.reset(17);
    for (int w = 0; w < 52; ++w) agg += env.step(w % 3 ? Action::kLockdown : Action::kNoLockdown).costs.aggregated;
    const double expected = beta == 0.0 ? env.health_cum() / cfg.scales.health : env.eco_cum() / cfg.scales.eco;
    EXPECT_NEAR(agg, expected, 1e-9 * expected);
  }
}

TEST(Env, TrajectoryReproducible) {
  auto policy = [](const Observation& o) { return o[obs::kLevel] < 0.5 ? Action::kLockdown : Action::kNoLockdown; };
  EpidemicEnv a(EnvConfig{}), b(EnvConfig{});
  std::ostringstream ja, jb;
  write_jsonl(ja, rollout(a, policy, 77));
  write_jsonl(jb, rollout(b, policy, 77));
  EXPECT_EQ(ja.str(), jb.str());
}

TEST(Env, JsonlRecordSchema) {
  EpidemicEnv env(EnvConfig{});
  const auto recs = rollout(env, constant(Action::kLockdown), 2);
  ASSERT_EQ(recs.size(), 52u);
  const auto j = to_json(recs.front());
  for (const char* k : {"week", "action", "S", "E", "I", "R", "A", "H", "b_level", "health_step", "eco_step",
                        "health_cum", "eco_cum", "aggregated"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["week"], 1);
  EXPECT_EQ(to_json(recs.back())["week"], 52);
}

TEST(Env, GoalFeatures) {
  EnvConfig cfg;
  cfg.obs_mode = ObservationMode::kGoalConstrained;
  cfg.goal = Goal{0.3, ConstraintSpec{31'000.0, std::nullopt}};
  EpidemicEnv env(cfg);
  const auto o = env.reset(1);
  ASSERT_EQ(o.size(), obs::kConstrainedDim);
  EXPECT_EQ(o[obs::kBeta], 0.3);
  EXPECT_EQ(o[obs::kHasDeathBound], 1.0);
  EXPECT_EQ(o[obs::kDeathBound], 0.5);
  EXPECT_EQ(o[obs::kDeathBudget], 0.5);
  EXPECT_EQ(o[obs::kHasEcoBound], 0.0);
}

TEST(EvaluatePolicy, SingleEpisodeHasZeroStderr) {
  const auto s = evaluate_policy(constant(Action::kNoLockdown), EnvConfig{}, 1, 5);
  EXPECT_EQ(s.n, 1);
  EXPECT_EQ(s.health_stderr, 0.0);
  EXPECT_EQ(s.eco_stderr, 0.0);
}

TEST(EvaluatePolicy, AlwaysLockdownEconomicCost) {
  const auto s = evaluate_policy(constant(Action::kLockdown), EnvConfig{}, 30, 5);
  EXPECT_NEAR(s.eco_mean, 150e9, 15e9);
  EXPECT_EQ(s.lockdown_fraction, 1.0);
}

TEST(EvaluatePolicy, OrderInvariantMeans) {
  const EnvConfig cfg;
  const auto s = evaluate_policy(constant(Action::kNoLockdown), cfg, 8, 21);
  double h = 0;
  for (int e = 7; e >= 0; --e) {
    EpidemicEnv env(cfg);
    rollout(env, constant(Action::kNoLockdown), episode_seed(21, e));
    h += env.health_cum();
  }
  EXPECT_NEAR(s.health_mean, h / 8, 1e-9 * s.health_mean);
}

TEST(EvaluatePolicy, LockdownTradesDeathsForMoney) {
  const auto locked = evaluate_policy(constant(Action::kLockdown), EnvConfig{}, 30, 8);
  const auto open = evaluate_policy(constant(Action::kNoLockdown), EnvConfig{}, 30, 8);
  EXPECT_LT(locked.health_mean, open.health_mean);
  EXPECT_GT(locked.eco_mean, open.eco_mean);
}

TEST(Env, BoundAtMaxEncodesAsAbsent) {
  EnvConfig a, b;
  a.obs_mode = b.obs_mode = ObservationMode::kGoalConstrained;
  a.goal = Goal{0.7, ConstraintSpec{30'500.0, kMaxEcoBound}};
  b.goal = Goal{0.7, ConstraintSpec{30'500.0, std::nullopt}};
  EpidemicEnv ea(a), eb(b);
  EXPECT_EQ(ea.reset(4), eb.reset(4));
  for (int w = 0; w < 5; ++w) EXPECT_EQ(ea.step(static_cast<Action>(w % 2)).observation, eb.step(static_cast<Action>(w % 2)).observation);
}
