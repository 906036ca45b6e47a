#pragma once

// Weekly lockdown decision process over one year of a sampled SEIRAH epidemic.

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "epiopt/costs.hpp"
#include "epiopt/rng.hpp"
#include "epiopt/seirah.hpp"

namespace epiopt {

enum class Action : int { kNoLockdown = 0, kLockdown = 1 };

inline constexpr int kNumActions = 2;
inline constexpr int to_index(Action a) noexcept { return static_cast<int>(a); }
inline constexpr Action action_from_index(int i) noexcept {
  return i == 0 ? Action::kNoLockdown : Action::kLockdown;
}
inline constexpr bool is_lockdown(Action a) noexcept { return a == Action::kLockdown; }

using Observation = std::vector<double>;

enum class ObservationMode { kBase, kGoal, kGoalConstrained };

inline constexpr int kHorizonWeeks = 52;
inline constexpr int kDaysPerWeek = 7;
inline constexpr double kEcoObsScale = 150e9;

/// Feature layout. Time never appears in the observation.
namespace obs {
inline constexpr std::size_t kS = 0, kE = 1, kI = 2, kR = 3, kA = 4, kH = 5;
inline constexpr std::size_t kPrevLockdown = 6;
inline constexpr std::size_t kCurrLockdown = 7;
inline constexpr std::size_t kHealthCum = 8;
inline constexpr std::size_t kEcoCum = 9;
inline constexpr std::size_t kLevel = 10;
inline constexpr std::size_t kBaseDim = 11;
inline constexpr std::size_t kBeta = 11;
inline constexpr std::size_t kGoalDim = 12;
inline constexpr std::size_t kHasDeathBound = 12;
inline constexpr std::size_t kDeathBound = 13;
inline constexpr std::size_t kDeathBudget = 14;
inline constexpr std::size_t kHasEcoBound = 15;
inline constexpr std::size_t kEcoBound = 16;
inline constexpr std::size_t kEcoBudget = 17;
inline constexpr std::size_t kConstrainedDim = 18;
}  // namespace obs

constexpr std::size_t observation_dim(ObservationMode mode) noexcept {
  switch (mode) {
    case ObservationMode::kBase: return obs::kBaseDim;
    case ObservationMode::kGoal: return obs::kGoalDim;
    case ObservationMode::kGoalConstrained: return obs::kConstrainedDim;
  }
  return obs::kBaseDim;
}

/// Target trade-off (mixing weight) and optional cumulative-cost bounds.
struct Goal {
  double beta = 0.5;
  ConstraintSpec constraints{};

  void validate() const {
    if (!(beta >= 0 && beta <= 1)) throw std::invalid_argument("goal beta must lie in [0, 1]");
    if (constraints.max_deaths && *constraints.max_deaths < 0)
      throw std::invalid_argument("max_deaths must be >= 0");
    if (constraints.max_eco && *constraints.max_eco < 0)
      throw std::invalid_argument("max_eco must be >= 0");
  }
};

/// Writes the goal features into obs[kBaseDim..] for the given mode.
inline void encode_goal(Observation& o, ObservationMode mode, const Goal& goal, double health_cum,
                        double eco_cum) {
  if (mode == ObservationMode::kBase) return;
  o[obs::kBeta] = goal.beta;
  if (mode != ObservationMode::kGoalConstrained) return;
  const ConstraintSpec c = effective_constraints(goal.constraints);
  o[obs::kHasDeathBound] = c.max_deaths ? 1.0 : 0.0;
  o[obs::kDeathBound] = c.max_deaths ? *c.max_deaths / kMaxDeathsBound : 0.0;
  o[obs::kDeathBudget] = c.max_deaths ? (*c.max_deaths - health_cum) / kMaxDeathsBound : 0.0;
  o[obs::kHasEcoBound] = c.max_eco ? 1.0 : 0.0;
  o[obs::kEcoBound] = c.max_eco ? *c.max_eco / kMaxEcoBound : 0.0;
  o[obs::kEcoBudget] = c.max_eco ? (*c.max_eco - eco_cum) / kMaxEcoBound : 0.0;
}

struct EnvConfig {
  int horizon_weeks = kHorizonWeeks;
  ModelDistribution distribution = ModelDistribution::relative(SeirahParams{});
  EconParams econ{};
  CostScales scales = CostScales::balanced();
  ObservationMode obs_mode = ObservationMode::kBase;
  Goal goal{};
  double dt = kDefaultStep;

  void validate() const {
    if (horizon_weeks < 1) throw std::invalid_argument("horizon_weeks must be >= 1");
    distribution.validate();
    econ.validate();
    goal.validate();
  }
};

struct StepResult {
  Observation observation;
  CostSnapshot costs;
  bool done = false;
  bool timeout = false;  ///< horizon reached; learners must still bootstrap
};

/// One logged week, the unit of trajectory export.
struct WeekRecord {
  int week = 0;  ///< 1-based index of the week just simulated
  Action action = Action::kNoLockdown;
  SeirahState state{};
  int level = 0;
  CostSnapshot costs{};
};

class EpidemicEnv {
 public:
  explicit EpidemicEnv(EnvConfig config) : config_(std::move(config)) { config_.validate(); }

  const EnvConfig& config() const noexcept { return config_; }
  std::size_t obs_dim() const noexcept { return observation_dim(config_.obs_mode); }

  /// Goal changes apply from the next observation on.
  void set_goal(const Goal& goal) {
    goal.validate();
    config_.goal = goal;
  }
  const Goal& goal() const noexcept { return config_.goal; }

  Observation reset(std::uint64_t seed) {
    Rng rng(seed);
    model_ = sample_model(config_.distribution, rng);
    state_ = initial_state(model_.params, model_.onset_delay, config_.dt);
    level_ = TransmissionLevel{};
    prev_lockdown_ = curr_lockdown_ = false;
    health_cum_ = eco_cum_ = 0.0;
    week_ = 0;
    started_ = true;
    return observe();
  }

  StepResult step(Action action) {
    if (!started_) throw std::logic_error("step called before reset");
    if (week_ >= config_.horizon_weeks) throw std::logic_error("step called after episode end");

    const bool lockdown = is_lockdown(action);
    prev_lockdown_ = curr_lockdown_;
    curr_lockdown_ = lockdown;
    level_ = update_level(level_, lockdown);
    const double b = transmission_rate(model_.params, level_);

    const SeirahState start = state_;
    std::array<SeirahState, kDaysPerWeek> daily;
    for (auto& d : daily) {
      state_ = integrate(state_, model_.params, b, 1.0, config_.dt);
      d = state_;
    }

    CostSnapshot c;
    c.health_step = health_cost_step(start, state_, model_.params);
    c.eco_step = economic_cost_step(daily, lockdown, config_.econ, model_.params);
    health_cum_ += c.health_step;
    eco_cum_ += c.eco_step;
    c.health_cum = health_cum_;
    c.eco_cum = eco_cum_;
    c.aggregated = aggregate(c.health_step, c.eco_step, config_.goal.beta, config_.scales);
    c.violations = check_constraints(health_cum_, eco_cum_, config_.goal.constraints);

    ++week_;
    last_ = WeekRecord{week_, action, state_, level_.value(), c};

    StepResult r;
    r.observation = observe();
    r.costs = c;
    r.done = week_ >= config_.horizon_weeks;
    r.timeout = r.done;
    return r;
  }

  Observation observe() const {
    Observation o(obs_dim(), 0.0);
    const double N = model_.params.N;
    o[obs::kS] = state_.S / N;
    o[obs::kE] = state_.E / N;
    o[obs::kI] = state_.I / N;
    o[obs::kR] = state_.R / N;
    o[obs::kA] = state_.A / N;
    o[obs::kH] = state_.H / N;
    o[obs::kPrevLockdown] = prev_lockdown_ ? 1.0 : 0.0;
    o[obs::kCurrLockdown] = curr_lockdown_ ? 1.0 : 0.0;
    o[obs::kHealthCum] = health_cum_ / N;
    o[obs::kEcoCum] = eco_cum_ / kEcoObsScale;
    o[obs::kLevel] = static_cast<double>(level_.value()) / kMaxLevel;
    encode_goal(o, config_.obs_mode, config_.goal, health_cum_, eco_cum_);
    return o;
  }

  const SampledModel& model() const noexcept { return model_; }
  const SeirahState& state() const noexcept { return state_; }
  TransmissionLevel level() const noexcept { return level_; }
  int week() const noexcept { return week_; }
  double health_cum() const noexcept { return health_cum_; }
  double eco_cum() const noexcept { return eco_cum_; }
  bool done() const noexcept { return started_ && week_ >= config_.horizon_weeks; }
  const WeekRecord& last_record() const noexcept { return last_; }

 private:
  EnvConfig config_;
  SampledModel model_{};
  SeirahState state_{};
  TransmissionLevel level_{};
  bool prev_lockdown_ = false;
  bool curr_lockdown_ = false;
  double health_cum_ = 0.0;
  double eco_cum_ = 0.0;
  int week_ = 0;
  bool started_ = false;
  WeekRecord last_{};
};

// ---------------------------------------------------------------------------
// Trajectories

inline nlohmann::json to_json(const WeekRecord& r) {
  return nlohmann::json{{"week", r.week},
                        {"action", to_index(r.action)},
                        {"S", r.state.S},
                        {"E", r.state.E},
                        {"I", r.state.I},
                        {"R", r.state.R},
                        {"A", r.state.A},
                        {"H", r.state.H},
                        {"b_level", r.level},
                        {"health_step", r.costs.health_step},
                        {"eco_step", r.costs.eco_step},
                        {"health_cum", r.costs.health_cum},
                        {"eco_cum", r.costs.eco_cum},
                        {"aggregated", r.costs.aggregated}};
}

inline void write_jsonl(std::ostream& out, const std::vector<WeekRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

/// Plays one full episode with `policy(obs) -> Action`.
template <class Policy>
std::vector<WeekRecord> rollout(EpidemicEnv& env, Policy&& policy, std::uint64_t seed) {
  std::vector<WeekRecord> records;
  records.reserve(static_cast<std::size_t>(env.config().horizon_weeks));
  Observation o = env.reset(seed);
  for (;;) {
    StepResult r = env.step(policy(o));
    records.push_back(env.last_record());
    if (r.done) break;
    o = std::move(r.observation);
  }
  return records;
}

// ---------------------------------------------------------------------------
// Policy evaluation

struct EvalSummary {
  int n = 0;
  double health_mean = 0, eco_mean = 0;
  double health_stderr = 0, eco_stderr = 0;
  double aggregated_mean = 0;
  double lockdown_fraction = 0;
  std::vector<double> health;  ///< per-episode cumulative deaths
  std::vector<double> eco;     ///< per-episode cumulative euros
};

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Standard error of the mean; 0 for fewer than two samples.
inline double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double n = static_cast<double>(v.size());
  return std::sqrt(ss / (n - 1)) / std::sqrt(n);
}

inline std::uint64_t episode_seed(std::uint64_t base_seed, int episode) {
  return derive_seed(base_seed, static_cast<std::uint64_t>(episode));
}

/// Runs `n_episodes` with seeds derived from `base_seed`.
template <class Policy>
EvalSummary evaluate_policy(Policy&& policy, const EnvConfig& config, int n_episodes,
                            std::uint64_t base_seed) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate_policy: n_episodes must be >= 1");
  EpidemicEnv env(config);
  EvalSummary s;
  s.n = n_episodes;
  double aggregated = 0.0;
  long lockdowns = 0, steps = 0;
  for (int e = 0; e < n_episodes; ++e) {
    Observation o = env.reset(episode_seed(base_seed, e));
    for (;;) {
      const Action a = policy(o);
      lockdowns += is_lockdown(a) ? 1 : 0;
      ++steps;
      StepResult r = env.step(a);
      aggregated += r.costs.aggregated;
      if (r.done) break;
      o = std::move(r.observation);
    }
    s.health.push_back(env.health_cum());
    s.eco.push_back(env.eco_cum());
  }
  s.health_mean = mean_of(s.health);
  s.eco_mean = mean_of(s.eco);
  s.health_stderr = stderr_of(s.health);
  s.eco_stderr = stderr_of(s.eco);
  s.aggregated_mean = aggregated / n_episodes;
  s.lockdown_fraction = static_cast<double>(lockdowns) / static_cast<double>(steps);
  return s;
}

}  // namespace epiopt
