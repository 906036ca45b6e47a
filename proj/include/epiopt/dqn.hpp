#pragma once

// Value-based learners for the lockdown problem:
//  - DQN on a fixed mixture of the two costs,
//  - Goal-DQN: one Q-network per cost, mixed at action-selection time,
//  - Goal-DQN-C: Goal-DQN plus undiscounted constraint-violation Q-networks
//    that filter out actions expected to break a bound.
//
// Rewards are negative scaled costs for the cost heads; constraint heads are
// trained directly on the (positive) violation indicator so that Q^c < 1
// reads as "fewer than one violating week expected".

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "epiopt/costs.hpp"
#include "epiopt/env.hpp"
#include "epiopt/policy.hpp"
#include "epiopt/rng.hpp"

namespace epiopt {

enum class AgentKind { kDqn, kGoalDqn, kGoalDqnC };

inline std::string to_string(AgentKind k) {
  switch (k) {
    case AgentKind::kDqn: return "dqn";
    case AgentKind::kGoalDqn: return "goal_dqn";
    case AgentKind::kGoalDqnC: return "goal_dqn_c";
  }
  return "dqn";
}

inline AgentKind agent_kind_from_string(const std::string& s) {
  if (s == "dqn") return AgentKind::kDqn;
  if (s == "goal_dqn" || s == "goal-dqn") return AgentKind::kGoalDqn;
  if (s == "goal_dqn_c" || s == "goal-dqn-c") return AgentKind::kGoalDqnC;
  throw std::invalid_argument("unknown agent kind: " + s);
}

inline ObservationMode observation_mode_for(AgentKind k) {
  switch (k) {
    case AgentKind::kDqn: return ObservationMode::kBase;
    case AgentKind::kGoalDqn: return ObservationMode::kGoal;
    case AgentKind::kGoalDqnC: return ObservationMode::kGoalConstrained;
  }
  return ObservationMode::kBase;
}

/// Head slots in a QEnsemble. DQN uses only kMixed (== slot 0).
namespace head {
inline constexpr std::size_t kMixed = 0;
inline constexpr std::size_t kHealth = 0;
inline constexpr std::size_t kEco = 1;
inline constexpr std::size_t kConstraintHealth = 2;
inline constexpr std::size_t kConstraintEco = 3;
}  // namespace head

inline std::size_t head_count(AgentKind k) {
  switch (k) {
    case AgentKind::kDqn: return 1;
    case AgentKind::kGoalDqn: return 2;
    case AgentKind::kGoalDqnC: return 4;
  }
  return 1;
}

inline std::vector<std::string> head_names(AgentKind k) {
  switch (k) {
    case AgentKind::kDqn: return {"mixed"};
    case AgentKind::kGoalDqn: return {"health", "eco"};
    case AgentKind::kGoalDqnC: return {"health", "eco", "c_health", "c_eco"};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Action selection

/// argmax_a (1 - beta) Q_h(s, a) + beta Q_eco(s, a); ties go to no-lockdown.
inline Action select_action_goal(std::span<const double> q_health, std::span<const double> q_eco, double beta) {
  if (q_health.size() != kNumActions || q_eco.size() != kNumActions)
    throw DimensionError("select_action_goal: expected 2 Q-values per head");
  const std::array<double, 2> mixed{(1 - beta) * q_health[0] + beta * q_eco[0],
                                    (1 - beta) * q_health[1] + beta * q_eco[1]};
  return act_greedy(mixed);
}

/// Restricts the goal-mixed argmax to actions whose expected number of future
/// violating weeks is below one for every active bound. If none qualifies,
/// picks the action with the smallest summed expected violations.
inline Action select_action_constrained(std::span<const double> q_health, std::span<const double> q_eco,
                                        std::span<const double> qc_health, std::span<const double> qc_eco,
                                        double beta, ConstraintFlags active) {
  if (qc_health.size() != kNumActions || qc_eco.size() != kNumActions)
    throw DimensionError("select_action_constrained: expected 2 values per constraint head");
  std::array<bool, 2> admissible{};
  std::array<double, 2> violation{};
  for (int a = 0; a < kNumActions; ++a) {
    const double vh = active.deaths ? qc_health[a] : 0.0;
    const double ve = active.eco ? qc_eco[a] : 0.0;
    admissible[a] = vh < 1.0 && ve < 1.0;
    violation[a] = vh + ve;
  }
  if (admissible[0] && admissible[1]) return select_action_goal(q_health, q_eco, beta);
  if (admissible[0]) return Action::kNoLockdown;
  if (admissible[1]) return Action::kLockdown;
  return violation[1] < violation[0] ? Action::kLockdown : Action::kNoLockdown;
}

inline ConstraintFlags active_constraints(const ConstraintSpec& spec) {
  const ConstraintSpec c = effective_constraints(spec);
  return {c.max_deaths.has_value(), c.max_eco.has_value()};
}

// ---------------------------------------------------------------------------
// Ensemble

/// The trained networks of one agent. Immutable after training.
struct QEnsemble {
  AgentKind kind = AgentKind::kDqn;
  double beta = 0.5;  ///< training mixture (DQN only)
  std::vector<Mlp> heads;

  ObservationMode obs_mode() const { return observation_mode_for(kind); }

  /// For DQN the goal is ignored (the mixture was fixed during training).
  Action act(const Observation& o, const Goal& goal) const {
    switch (kind) {
      case AgentKind::kDqn: return act_greedy(heads[head::kMixed].forward(o));
      case AgentKind::kGoalDqn:
        return select_action_goal(heads[head::kHealth].forward(o), heads[head::kEco].forward(o), goal.beta);
      case AgentKind::kGoalDqnC:
        return select_action_constrained(heads[head::kHealth].forward(o), heads[head::kEco].forward(o),
                                         heads[head::kConstraintHealth].forward(o),
                                         heads[head::kConstraintEco].forward(o), goal.beta,
                                         active_constraints(goal.constraints));
    }
    return Action::kNoLockdown;
  }
};

// ---------------------------------------------------------------------------
// Optimisation primitives

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw DimensionError("Adam: size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1_ * m_[i] + (1 - b1_) * grad[i];
      v_[i] = b2_ * v_[i] + (1 - b2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

 private:
  double lr_ = 1e-3, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
  std::vector<double> m_, v_;
  long t_ = 0;
};

/// Q <- Q + lr (r + gamma max_a' Q(s', a') - Q), the scalar form of the update.
constexpr double tabular_td_update(double q, double reward, double gamma, double max_next_q, double lr) {
  return q + lr * (reward + gamma * max_next_q - q);
}

/// An online network with its frozen target copy and optimiser state.
struct QHead {
  Mlp online;
  Mlp target;
  Adam optimizer;

  QHead() = default;
  QHead(Mlp init, double lr) : online(init), target(std::move(init)), optimizer(online.flat().size(), lr) {}
  void sync() { target = online; }
};

/// One squared-error gradient step of `head.online` towards `targets` on the
/// taken `actions`. `obs` is input_dim x batch. Returns the mean squared TD error
/// before the step.
inline double td_update(QHead& head, const Eigen::MatrixXd& obs, std::span<const int> actions,
                        const Eigen::VectorXd& targets) {
  const auto batch = static_cast<std::size_t>(obs.cols());
  if (actions.size() != batch || static_cast<std::size_t>(targets.size()) != batch)
    throw DimensionError("td_update: batch size mismatch");
  MlpCache cache;
  head.online.forward_batch(obs, cache);
  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(cache.output.rows(), cache.output.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const double err = cache.output(actions[i], col) - targets(col);
    loss += err * err;
    d_out(actions[i], col) = 2.0 * err / static_cast<double>(batch);
  }
  std::vector<double> grad(head.online.flat().size(), 0.0);
  head.online.backward_batch(obs, cache, d_out, grad);
  head.optimizer.step(head.online.params(), grad);
  return loss / static_cast<double>(batch);
}

/// DQN targets r + gamma max_a' Q_target(s', a'). Timeouts are not terminal, so
/// every transition bootstraps.
inline Eigen::VectorXd td_targets_max(const Eigen::VectorXd& rewards, const Eigen::MatrixXd& next_q_target,
                                      double gamma) {
  return rewards + gamma * next_q_target.colwise().maxCoeff().transpose();
}

// ---------------------------------------------------------------------------
// Replay

struct Transition {
  Observation obs;
  Action action = Action::kNoLockdown;
  double health_step = 0;  ///< deaths
  double eco_step = 0;     ///< euros
  double aggregated = 0;   ///< mixed scaled cost under the behaviour goal
  ConstraintFlags violations{};
  Observation next_obs;
  bool timeout = false;
  // Cumulatives before/after the step; used to re-encode goal features.
  double health_cum_before = 0, eco_cum_before = 0;
  double health_cum_after = 0, eco_cum_after = 0;
  Goal goal{};
};

/// Fixed-capacity ring buffer with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
    data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
  }

  std::size_t size() const noexcept { return data_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const Transition& operator[](std::size_t i) const { return data_.at(i); }

  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    if (data_.empty()) throw std::logic_error("ReplayBuffer: sampling from empty buffer");
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = pick(rng);
    return idx;
  }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> data_;
};

// ---------------------------------------------------------------------------
// Training configuration

struct TrainConfig {
  long total_env_steps = 1'000'000;
  std::size_t replay_capacity = 50'000;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double gamma = 0.99;            ///< cost heads
  double constraint_gamma = 1.0;  ///< constraint heads
  int target_update_period = 500; ///< gradient steps between target syncs
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.2;
  long learning_starts = 1'000;
  int train_every = 1;            ///< env steps per gradient step
  long eval_every = 20'000;       ///< env steps; 0 disables periodic evaluation
  int eval_episodes = 30;
  std::uint64_t eval_seed = 1'000'003;
  int hidden_dim = 64;
  double relabel_probability = 0.5;       ///< goal modes: resample goals in replay
  double constraint_probability = 0.5;    ///< Goal-DQN-C: episodes with one bound
  /// Goals used for periodic evaluation in goal modes (empty: defaults).
  std::vector<Goal> eval_goals;

  void validate() const {
    if (total_env_steps < 1) throw std::invalid_argument("total_env_steps must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (constraint_gamma != 1.0) throw std::invalid_argument("constraint heads require gamma = 1");
    if (gamma < 0 || gamma > 1) throw std::invalid_argument("gamma must lie in [0, 1]");
    if (target_update_period < 1 || train_every < 1) throw std::invalid_argument("periods must be >= 1");
  }

  double epsilon_at(long step) const {
    const double decay = epsilon_decay_fraction * static_cast<double>(total_env_steps);
    if (decay <= 0) return epsilon_end;
    const double frac = std::min(1.0, static_cast<double>(step) / decay);
    return epsilon_start + frac * (epsilon_end - epsilon_start);
  }
};

inline std::vector<Goal> default_eval_goals(AgentKind kind) {
  std::vector<Goal> goals;
  for (double b : {0.1, 0.3, 0.5, 0.7, 0.9}) goals.push_back(Goal{b, {}});
  if (kind == AgentKind::kGoalDqnC) {
    goals.push_back(Goal{0.7, ConstraintSpec{30'500.0, std::nullopt}});
    goals.push_back(Goal{0.9, ConstraintSpec{15'000.0, std::nullopt}});
    goals.push_back(Goal{0.3, ConstraintSpec{std::nullopt, 55e9}});
  }
  return goals;
}

/// Training goal distribution: beta ~ U[0, 1]; for Goal-DQN-C, with the
/// configured probability one of the two bounds is drawn from its range.
inline Goal sample_training_goal(AgentKind kind, double constraint_probability, Rng& rng) {
  Goal g;
  g.beta = uniform01(rng);
  if (kind == AgentKind::kGoalDqnC && uniform01(rng) < constraint_probability) {
    if (uniform01(rng) < 0.5) {
      g.constraints.max_deaths = kMinDeathsBound + uniform01(rng) * (kMaxDeathsBound - kMinDeathsBound);
    } else {
      g.constraints.max_eco = kMinEcoBound + uniform01(rng) * (kMaxEcoBound - kMinEcoBound);
    }
  }
  return g;
}

struct TrainLogRow {
  long step = 0;
  double health_mean = 0;
  double eco_mean = 0;
  double loss = 0;
  double score = 0;  ///< lower is better
};

struct EvalReport {
  double score = 0;
  double health_mean = 0;
  double eco_mean = 0;
};

struct TrainResult {
  QEnsemble best;
  QEnsemble final;
  std::vector<TrainLogRow> log;
  long best_step = 0;
};

/// What the learners need from an environment.
template <class E>
concept QEnvironment = requires(E e, const E ce, Action a, std::uint64_t seed) {
  { e.reset(seed) } -> std::convertible_to<Observation>;
  { e.step(a) } -> std::convertible_to<StepResult>;
  { ce.obs_dim() } -> std::convertible_to<std::size_t>;
};

template <class E>
concept GoalEnvironment = QEnvironment<E> && requires(E e, const E ce, const Goal& g) {
  e.set_goal(g);
  { ce.health_cum() } -> std::convertible_to<double>;
  { ce.eco_cum() } -> std::convertible_to<double>;
  { ce.config() } -> std::convertible_to<const EnvConfig&>;
};

using Evaluator = std::function<EvalReport(const QEnsemble&)>;

namespace detail {

inline Eigen::MatrixXd stack_columns(const std::vector<Observation>& xs) {
  const auto rows = static_cast<Eigen::Index>(xs.front().size());
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t j = 0; j < xs.size(); ++j)
    m.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(xs[j].data(), rows);
  return m;
}

inline std::array<double, 2> column2(const Eigen::MatrixXd& m, Eigen::Index j) { return {m(0, j), m(1, j)}; }

/// The learner shared by all three agent kinds.
class QLearner {
 public:
  QLearner(AgentKind kind, std::size_t obs_dim, const TrainConfig& cfg, CostScales scales, double fixed_beta,
           ObservationMode mode, Rng& rng)
      : kind_(kind), cfg_(cfg), scales_(scales), fixed_beta_(fixed_beta), mode_(mode), replay_(cfg.replay_capacity) {
    const MlpSpec spec{static_cast<int>(obs_dim), cfg.hidden_dim, kNumActions};
    for (std::size_t h = 0; h < head_count(kind); ++h)
      heads_.emplace_back(Mlp::initialized(spec, rng), cfg.learning_rate);
  }

  QEnsemble snapshot() const {
    QEnsemble e;
    e.kind = kind_;
    e.beta = fixed_beta_;
    for (const auto& h : heads_) e.heads.push_back(h.online);
    return e;
  }

  Action behave(const Observation& o, const Goal& goal, double epsilon, Rng& rng) const {
    if (uniform01(rng) < epsilon) return uniform01(rng) < 0.5 ? Action::kNoLockdown : Action::kLockdown;
    return greedy(o, goal);
  }

  Action greedy(const Observation& o, const Goal& goal) const {
    switch (kind_) {
      case AgentKind::kDqn: return act_greedy(heads_[head::kMixed].online.forward(o));
      case AgentKind::kGoalDqn:
        return select_action_goal(heads_[head::kHealth].online.forward(o), heads_[head::kEco].online.forward(o),
                                  goal.beta);
      case AgentKind::kGoalDqnC:
        return select_action_constrained(
            heads_[head::kHealth].online.forward(o), heads_[head::kEco].online.forward(o),
            heads_[head::kConstraintHealth].online.forward(o), heads_[head::kConstraintEco].online.forward(o),
            goal.beta, active_constraints(goal.constraints));
    }
    return Action::kNoLockdown;
  }

  void remember(Transition t) { replay_.push(std::move(t)); }
  std::size_t replay_size() const { return replay_.size(); }

  /// One gradient step on every head. Returns the summed loss.
  double learn(Rng& rng, int horizon_weeks) {
    const auto batch = static_cast<std::size_t>(cfg_.batch_size);
    const auto idx = replay_.sample_indices(batch, rng);

    std::vector<Observation> obs(batch), next(batch);
    std::vector<Goal> goals(batch);
    std::vector<int> actions(batch);
    Eigen::VectorXd r_mixed(batch), r_health(batch), r_eco(batch), c_health(batch), c_eco(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      const Transition& t = replay_[idx[i]];
      obs[i] = t.obs;
      next[i] = t.next_obs;
      goals[i] = t.goal;
      actions[i] = to_index(t.action);
      ConstraintFlags v = t.violations;
      if (kind_ != AgentKind::kDqn && uniform01(rng) < cfg_.relabel_probability) {
        goals[i] = sample_training_goal(kind_, cfg_.constraint_probability, rng);
        encode_goal(obs[i], mode_, goals[i], t.health_cum_before, t.eco_cum_before);
        encode_goal(next[i], mode_, goals[i], t.health_cum_after, t.eco_cum_after);
        v = check_constraints(t.health_cum_after, t.eco_cum_after, goals[i].constraints);
      }
      const auto k = static_cast<Eigen::Index>(i);
      r_mixed(k) = -t.aggregated;
      r_health(k) = -t.health_step / scales_.health;
      r_eco(k) = -t.eco_step / scales_.eco;
      c_health(k) = v.deaths ? 1.0 : 0.0;
      c_eco(k) = v.eco ? 1.0 : 0.0;
    }
    const Eigen::MatrixXd x = stack_columns(obs);
    const Eigen::MatrixXd xn = stack_columns(next);

    std::vector<Eigen::MatrixXd> next_q;
    for (const auto& h : heads_) next_q.push_back(h.target.forward_batch(xn));

    double loss = 0.0;
    if (kind_ == AgentKind::kDqn) {
      loss += td_update(heads_[head::kMixed], x, actions, td_targets_max(r_mixed, next_q[0], cfg_.gamma));
    } else {
      // Every head bootstraps on the action the goal-conditioned policy would take in s'.
      Eigen::VectorXd y_health(batch), y_eco(batch), y_ch(batch), y_ce(batch);
      const double cap = static_cast<double>(horizon_weeks);
      for (std::size_t i = 0; i < batch; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const auto qh = column2(next_q[head::kHealth], k);
        const auto qe = column2(next_q[head::kEco], k);
        Action a_next;
        if (kind_ == AgentKind::kGoalDqnC) {
          const auto qch = column2(next_q[head::kConstraintHealth], k);
          const auto qce = column2(next_q[head::kConstraintEco], k);
          a_next = select_action_constrained(qh, qe, qch, qce, goals[i].beta, active_constraints(goals[i].constraints));
          const int an = to_index(a_next);
          y_ch(k) = std::clamp(c_health(k) + cfg_.constraint_gamma * qch[an], 0.0, cap);
          y_ce(k) = std::clamp(c_eco(k) + cfg_.constraint_gamma * qce[an], 0.0, cap);
        } else {
          a_next = select_action_goal(qh, qe, goals[i].beta);
        }
        const int an = to_index(a_next);
        y_health(k) = r_health(k) + cfg_.gamma * qh[an];
        y_eco(k) = r_eco(k) + cfg_.gamma * qe[an];
      }
      loss += td_update(heads_[head::kHealth], x, actions, y_health);
      loss += td_update(heads_[head::kEco], x, actions, y_eco);
      if (kind_ == AgentKind::kGoalDqnC) {
        loss += td_update(heads_[head::kConstraintHealth], x, actions, y_ch);
        loss += td_update(heads_[head::kConstraintEco], x, actions, y_ce);
      }
    }

    if (++grad_steps_ % cfg_.target_update_period == 0)
      for (auto& h : heads_) h.sync();
    return loss;
  }

 private:
  AgentKind kind_;
  TrainConfig cfg_;
  CostScales scales_;
  double fixed_beta_;
  ObservationMode mode_;
  std::vector<QHead> heads_;
  ReplayBuffer replay_;
  long grad_steps_ = 0;
};

}  // namespace detail

/// Shared training loop. `env` must already be configured with the
/// observation mode that matches `kind`. Returns the ensemble with the lowest
/// evaluation score (or the final one when no evaluator is supplied).
template <QEnvironment Env>
TrainResult train_q_agent(Env& env, AgentKind kind, const TrainConfig& cfg, CostScales scales, double fixed_beta,
                          ObservationMode mode, int horizon_weeks, std::uint64_t seed,
                          const Evaluator& evaluate = {}) {
  cfg.validate();
  Rng rng(seed);
  detail::QLearner learner(kind, env.obs_dim(), cfg, scales, fixed_beta, mode, rng);

  TrainResult result;
  double best_score = std::numeric_limits<double>::infinity();
  double loss_acc = 0.0;
  long loss_count = 0;

  auto run_eval = [&](long step) {
    QEnsemble snap = learner.snapshot();
    TrainLogRow row;
    row.step = step;
    row.loss = loss_count > 0 ? loss_acc / static_cast<double>(loss_count) : 0.0;
    loss_acc = 0.0;
    loss_count = 0;
    if (evaluate) {
      const EvalReport rep = evaluate(snap);
      row.health_mean = rep.health_mean;
      row.eco_mean = rep.eco_mean;
      row.score = rep.score;
      if (rep.score < best_score) {
        best_score = rep.score;
        result.best = snap;
        result.best_step = step;
      }
    }
    result.log.push_back(row);
  };

  long step = 0;
  std::uint64_t episode = 0;
  while (step < cfg.total_env_steps) {
    Goal goal{fixed_beta, {}};
    if constexpr (GoalEnvironment<Env>) {
      if (kind != AgentKind::kDqn) {
        goal = sample_training_goal(kind, cfg.constraint_probability, rng);
        env.set_goal(goal);
      } else {
        goal = env.config().goal;
      }
    }
    Observation o = env.reset(derive_seed(seed ^ stream::kTrain, episode++));
    for (;;) {
      const Action a = learner.behave(o, goal, cfg.epsilon_at(step), rng);
      Transition t;
      if constexpr (GoalEnvironment<Env>) {
        t.health_cum_before = env.health_cum();
        t.eco_cum_before = env.eco_cum();
      }
      StepResult r = env.step(a);
      ++step;
      t.obs = std::move(o);
      t.action = a;
      t.health_step = r.costs.health_step;
      t.eco_step = r.costs.eco_step;
      t.aggregated = r.costs.aggregated;
      t.violations = r.costs.violations;
      t.next_obs = r.observation;
      t.timeout = r.timeout;
      t.health_cum_after = r.costs.health_cum;
      t.eco_cum_after = r.costs.eco_cum;
      t.goal = goal;
      learner.remember(std::move(t));

      if (step >= cfg.learning_starts && learner.replay_size() >= static_cast<std::size_t>(cfg.batch_size) &&
          step % cfg.train_every == 0) {
        loss_acc += learner.learn(rng, horizon_weeks);
        ++loss_count;
      }
      if (cfg.eval_every > 0 && step % cfg.eval_every == 0) run_eval(step);
      if (r.done || step >= cfg.total_env_steps) break;
      o = std::move(r.observation);
    }
  }
  if (cfg.eval_every <= 0 || step % cfg.eval_every != 0) run_eval(step);
  result.final = learner.snapshot();
  if (!evaluate) {
    result.best = result.final;
    result.best_step = step;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Epidemic-specific entry points

/// Scores an ensemble on the evaluation goals: mean aggregated cost plus the
/// fraction of episodes that break an active bound.
inline EvalReport evaluate_ensemble(const QEnsemble& q, const EnvConfig& base, const std::vector<Goal>& goals,
                                    int episodes, std::uint64_t seed) {
  EvalReport rep;
  for (const Goal& g : goals) {
    EnvConfig cfg = base;
    cfg.obs_mode = q.obs_mode();
    cfg.goal = g;
    const EvalSummary s = evaluate_policy([&](const Observation& o) { return q.act(o, g); }, cfg, episodes, seed);
    double broken = 0.0;
    for (int e = 0; e < s.n; ++e)
      broken += check_constraints(s.health[e], s.eco[e], g.constraints).any() ? 1.0 : 0.0;
    rep.score += s.aggregated_mean + broken / s.n;
    rep.health_mean += s.health_mean;
    rep.eco_mean += s.eco_mean;
  }
  const double n = static_cast<double>(goals.size());
  rep.score /= n;
  rep.health_mean /= n;
  rep.eco_mean /= n;
  return rep;
}

/// Fixed-mixture DQN on the epidemic environment. `env_cfg.goal.beta` is the mixture.
inline TrainResult train_dqn(EnvConfig env_cfg, const TrainConfig& cfg, std::uint64_t seed) {
  env_cfg.obs_mode = ObservationMode::kBase;
  env_cfg.goal.constraints = {};
  EpidemicEnv env(env_cfg);
  const std::vector<Goal> goals{env_cfg.goal};
  Evaluator eval = [&](const QEnsemble& q) {
    return evaluate_ensemble(q, env_cfg, goals, cfg.eval_episodes, cfg.eval_seed);
  };
  return train_q_agent(env, AgentKind::kDqn, cfg, env_cfg.scales, env_cfg.goal.beta, env_cfg.obs_mode,
                       env_cfg.horizon_weeks, seed, eval);
}

inline TrainResult train_goal_agent(AgentKind kind, EnvConfig env_cfg, const TrainConfig& cfg, std::uint64_t seed) {
  if (kind == AgentKind::kDqn) throw std::invalid_argument("train_goal_agent: goal kinds only");
  env_cfg.obs_mode = observation_mode_for(kind);
  EpidemicEnv env(env_cfg);
  const std::vector<Goal> goals = cfg.eval_goals.empty() ? default_eval_goals(kind) : cfg.eval_goals;
  Evaluator eval = [&](const QEnsemble& q) {
    return evaluate_ensemble(q, env_cfg, goals, cfg.eval_episodes, cfg.eval_seed);
  };
  return train_q_agent(env, kind, cfg, env_cfg.scales, 0.5, env_cfg.obs_mode, env_cfg.horizon_weeks, seed, eval);
}

inline TrainResult train_goal_dqn(const EnvConfig& env_cfg, const TrainConfig& cfg, std::uint64_t seed) {
  return train_goal_agent(AgentKind::kGoalDqn, env_cfg, cfg, seed);
}

inline TrainResult train_goal_dqn_c(const EnvConfig& env_cfg, const TrainConfig& cfg, std::uint64_t seed) {
  return train_goal_agent(AgentKind::kGoalDqnC, env_cfg, cfg, seed);
}

}  // namespace epiopt
