#pragma once

// Experiment orchestration: JSON run configs, training dispatch, persisted
// run directories, goal sweeps, union fronts and multi-run comparisons.
//
// Run directory layout (write-once):
//   config.json          run id, algorithm, seed and the full resolved config
//   log.csv              policy,step,health_mean,eco_mean,loss,score
//   policies/<name>/     policy.json + weights_<head>.json
//   evaluations.json     every evaluated policy (or goal) point
//   pareto_final.json    the non-dominated subset of evaluations.json
//   pareto_gen_<k>.json  NSGA-II only: front of generation k

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "epiopt/artifact.hpp"
#include "epiopt/dqn.hpp"
#include "epiopt/env.hpp"
#include "epiopt/nsga2.hpp"
#include "epiopt/pareto.hpp"
#include "epiopt/params_json.hpp"
#include "epiopt/stats.hpp"

#ifndef EPIOPT_VERSION
#define EPIOPT_VERSION "0.0.0"
#endif

namespace epiopt {

using json = nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline const std::vector<std::string>& algorithm_tags() {
  static const std::vector<std::string> tags{"dqn", "goal_dqn", "goal_dqn_c", "nsga2"};
  return tags;
}

/// Canonical tag; accepts the hyphenated CLI spelling.
inline std::string canonical_algorithm(std::string tag) {
  for (auto& c : tag)
    if (c == '-') c = '_';
  for (const auto& t : algorithm_tags())
    if (t == tag) return t;
  throw ConfigError("unknown algorithm: " + tag);
}

inline std::vector<double> default_beta_grid() {
  std::vector<double> b;
  for (int i = 0; i <= 20; ++i) b.push_back(i / 20.0);
  return b;
}

struct ExperimentConfig {
  std::string algo = "dqn";
  std::string label;  ///< optional grouping label for comparisons

  ModelParameters params{};
  double param_stdev_fraction = 0.10;
  double onset_delay_min = 0.0;
  double onset_delay_max = 21.0;
  int horizon_weeks = kHorizonWeeks;
  CostScales scales = CostScales::balanced();

  TrainConfig train{};
  std::vector<double> betas = default_beta_grid();

  Nsga2Config nsga2{};
  std::optional<long> nsga2_budget;  ///< env steps; overrides generations
  int nsga2_hidden = 64;

  int eval_episodes = 30;
  std::uint64_t eval_seed = 1'000'003;
  int sweep_goals = 100;

  EnvConfig env_config() const {
    EnvConfig e;
    e.horizon_weeks = horizon_weeks;
    e.distribution = ModelDistribution::relative(params.seirah, param_stdev_fraction);
    e.distribution.onset_delay_min = onset_delay_min;
    e.distribution.onset_delay_max = onset_delay_max;
    e.econ = params.econ;
    e.scales = scales;
    return e;
  }

  Nsga2Config resolved_nsga2(std::uint64_t seed) const {
    Nsga2Config c = nsga2;
    c.seed = seed;
    if (nsga2_budget)
      c.generations = Nsga2Config::generations_for_budget(*nsga2_budget, c.population_size, c.n_eval, horizon_weeks);
    return c;
  }

  void validate() const {
    canonical_algorithm(algo);
    if (betas.empty()) throw ConfigError("dqn.betas must not be empty");
    for (double b : betas)
      if (!(b >= 0 && b <= 1)) throw ConfigError("dqn.betas must lie in [0, 1]");
    if (eval_episodes < 1) throw ConfigError("evaluation.episodes must be >= 1");
    if (sweep_goals < 1) throw ConfigError("evaluation.sweep_goals must be >= 1");
    if (param_stdev_fraction < 0) throw ConfigError("env.param_stdev_fraction must be >= 0");
    if (onset_delay_min < 0 || onset_delay_max < onset_delay_min) throw ConfigError("env.onset_delay is invalid");
    if (scales.health <= 0 || scales.eco <= 0) throw ConfigError("env.scales must be > 0");
    train.validate();
    nsga2.validate();
    env_config().validate();
  }
};

// ---------------------------------------------------------------------------
// Config JSON

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline json train_config_to_json(const TrainConfig& t) {
  return json{{"total_env_steps", t.total_env_steps},
              {"replay_capacity", t.replay_capacity},
              {"batch_size", t.batch_size},
              {"learning_rate", t.learning_rate},
              {"gamma", t.gamma},
              {"constraint_gamma", t.constraint_gamma},
              {"target_update_period", t.target_update_period},
              {"epsilon_start", t.epsilon_start},
              {"epsilon_end", t.epsilon_end},
              {"epsilon_decay_fraction", t.epsilon_decay_fraction},
              {"learning_starts", t.learning_starts},
              {"train_every", t.train_every},
              {"eval_every", t.eval_every},
              {"eval_episodes", t.eval_episodes},
              {"eval_seed", t.eval_seed},
              {"hidden_dim", t.hidden_dim},
              {"relabel_probability", t.relabel_probability},
              {"constraint_probability", t.constraint_probability}};
}

inline TrainConfig train_config_from_json(const json& j) {
  detail::reject_unknown(j,
                         {"total_env_steps", "replay_capacity", "batch_size", "learning_rate", "gamma",
                          "constraint_gamma", "target_update_period", "epsilon_start", "epsilon_end",
                          "epsilon_decay_fraction", "learning_starts", "train_every", "eval_every", "eval_episodes",
                          "eval_seed", "hidden_dim", "relabel_probability", "constraint_probability"},
                         "train");
  TrainConfig t;
  detail::read_if(j, "total_env_steps", t.total_env_steps);
  detail::read_if(j, "replay_capacity", t.replay_capacity);
  detail::read_if(j, "batch_size", t.batch_size);
  detail::read_if(j, "learning_rate", t.learning_rate);
  detail::read_if(j, "gamma", t.gamma);
  detail::read_if(j, "constraint_gamma", t.constraint_gamma);
  detail::read_if(j, "target_update_period", t.target_update_period);
  detail::read_if(j, "epsilon_start", t.epsilon_start);
  detail::read_if(j, "epsilon_end", t.epsilon_end);
  detail::read_if(j, "epsilon_decay_fraction", t.epsilon_decay_fraction);
  detail::read_if(j, "learning_starts", t.learning_starts);
  detail::read_if(j, "train_every", t.train_every);
  detail::read_if(j, "eval_every", t.eval_every);
  detail::read_if(j, "eval_episodes", t.eval_episodes);
  detail::read_if(j, "eval_seed", t.eval_seed);
  detail::read_if(j, "hidden_dim", t.hidden_dim);
  detail::read_if(j, "relabel_probability", t.relabel_probability);
  detail::read_if(j, "constraint_probability", t.constraint_probability);
  return t;
}

inline json experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  j["algo"] = c.algo;
  if (!c.label.empty()) j["label"] = c.label;
  j["env"] = {{"params", parameters_to_json(c.params)},
              {"param_stdev_fraction", c.param_stdev_fraction},
              {"onset_delay", {c.onset_delay_min, c.onset_delay_max}},
              {"horizon_weeks", c.horizon_weeks},
              {"scales", {{"health", c.scales.health}, {"eco", c.scales.eco}}}};
  j["train"] = train_config_to_json(c.train);
  j["dqn"] = {{"betas", c.betas}};
  j["nsga2"] = {{"population_size", c.nsga2.population_size}, {"generations", c.nsga2.generations},
                {"crossover_rate", c.nsga2.crossover_rate},     {"mutation_rate", c.nsga2.mutation_rate},
                {"mutation_scale", c.nsga2.mutation_scale},     {"tournament_size", c.nsga2.tournament_size},
                {"n_eval", c.nsga2.n_eval},                     {"hidden_dim", c.nsga2_hidden}};
  if (c.nsga2_budget) j["nsga2"]["budget"] = *c.nsga2_budget;
  j["evaluation"] = {{"episodes", c.eval_episodes}, {"seed", c.eval_seed}, {"sweep_goals", c.sweep_goals}};
  return j;
}

/// Missing keys take their defaults; unknown keys are rejected.
inline ExperimentConfig experiment_config_from_json(const json& j) {
  detail::reject_unknown(j, {"algo", "label", "env", "train", "dqn", "nsga2", "evaluation"}, "config");
  ExperimentConfig c;
  try {
    detail::read_if(j, "algo", c.algo);
    detail::read_if(j, "label", c.label);
    if (j.contains("env")) {
      const json& e = j.at("env");
      detail::reject_unknown(e, {"params", "params_file", "param_stdev_fraction", "onset_delay", "horizon_weeks", "scales"},
                             "env");
      if (e.contains("params_file")) c.params = load_parameters(e.at("params_file").get<std::string>());
      if (e.contains("params")) c.params = parameters_from_json(e.at("params"));
      detail::read_if(e, "param_stdev_fraction", c.param_stdev_fraction);
      if (e.contains("onset_delay")) {
        const auto d = e.at("onset_delay").get<std::vector<double>>();
        if (d.size() != 2) throw ConfigError("env.onset_delay must be [min, max]");
        c.onset_delay_min = d[0];
        c.onset_delay_max = d[1];
      }
      detail::read_if(e, "horizon_weeks", c.horizon_weeks);
      if (e.contains("scales")) {
        detail::reject_unknown(e.at("scales"), {"health", "eco"}, "env.scales");
        detail::read_if(e.at("scales"), "health", c.scales.health);
        detail::read_if(e.at("scales"), "eco", c.scales.eco);
      }
    }
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("dqn")) {
      detail::reject_unknown(j.at("dqn"), {"betas"}, "dqn");
      detail::read_if(j.at("dqn"), "betas", c.betas);
    }
    if (j.contains("nsga2")) {
      const json& n = j.at("nsga2");
      detail::reject_unknown(n,
                             {"population_size", "generations", "budget", "crossover_rate", "mutation_rate",
                              "mutation_scale", "tournament_size", "n_eval", "hidden_dim"},
                             "nsga2");
      detail::read_if(n, "population_size", c.nsga2.population_size);
      detail::read_if(n, "generations", c.nsga2.generations);
      detail::read_if(n, "crossover_rate", c.nsga2.crossover_rate);
      detail::read_if(n, "mutation_rate", c.nsga2.mutation_rate);
      detail::read_if(n, "mutation_scale", c.nsga2.mutation_scale);
      detail::read_if(n, "tournament_size", c.nsga2.tournament_size);
      detail::read_if(n, "n_eval", c.nsga2.n_eval);
      detail::read_if(n, "hidden_dim", c.nsga2_hidden);
      if (n.contains("budget")) c.nsga2_budget = n.at("budget").get<long>();
    }
    if (j.contains("evaluation")) {
      const json& v = j.at("evaluation");
      detail::reject_unknown(v, {"episodes", "seed", "sweep_goals"}, "evaluation");
      detail::read_if(v, "episodes", c.eval_episodes);
      detail::read_if(v, "seed", c.eval_seed);
      detail::read_if(v, "sweep_goals", c.sweep_goals);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.algo = canonical_algorithm(c.algo);
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Evaluation helpers

inline EvalSummary evaluate_stored(const StoredPolicy& p, const EnvConfig& base, const Goal& goal, int episodes,
                                   std::uint64_t seed) {
  const EnvConfig cfg = p.env_for(base, goal);
  return evaluate_policy([&](const Observation& o) { return p.act(o, cfg.goal); }, cfg, episodes, seed);
}

inline FrontPoint to_point(const EvalSummary& s, std::string ref) {
  FrontPoint f;
  f.health = s.health_mean;
  f.eco = s.eco_mean;
  f.health_stderr = s.health_stderr;
  f.eco_stderr = s.eco_stderr;
  f.policy_ref = std::move(ref);
  return f;
}

/// n uniformly spaced mixtures on [0, 1]; a single goal sits at 0.5.
inline std::vector<double> sweep_betas(int n_goals) {
  if (n_goals < 1) throw std::invalid_argument("sweep: n_goals must be >= 1");
  if (n_goals == 1) return {0.5};
  std::vector<double> b(static_cast<std::size_t>(n_goals));
  for (int i = 0; i < n_goals; ++i) b[static_cast<std::size_t>(i)] = static_cast<double>(i) / (n_goals - 1);
  return b;
}

/// Evaluates one goal-conditioned policy on n_goals mixtures (and optional
/// constraint settings), `episodes` episodes each with the same seeds.
inline std::vector<FrontPoint> goal_sweep(const StoredPolicy& p, const EnvConfig& base, int n_goals, int episodes,
                                          std::uint64_t seed, const std::string& policy_ref,
                                          const std::vector<ConstraintSpec>& constraint_grid = {ConstraintSpec{}}) {
  if (!p.goal_conditioned()) throw std::invalid_argument("goal_sweep: policy is not goal-conditioned");
  std::vector<FrontPoint> out;
  for (const auto& c : constraint_grid) {
    if (c.any() && !p.constraint_aware()) throw std::invalid_argument("goal_sweep: policy ignores constraints");
    for (double beta : sweep_betas(n_goals)) {
      FrontPoint f = to_point(evaluate_stored(p, base, Goal{beta, c}, episodes, seed), policy_ref);
      f.beta = beta;
      f.constraints = c;
      out.push_back(std::move(f));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running experiments

struct RunSummary {
  std::string run_id;
  std::string algo;
  std::vector<std::string> policies;
  std::vector<FrontPoint> evaluations;
  ParetoFront front;
};

using ProgressFn = std::function<void(const std::string&)>;

inline std::string format_beta(double b) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", b);
  return buf;
}

inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

struct LogLine {
  std::string policy;
  TrainLogRow row;
};

inline std::string log_csv(const std::vector<LogLine>& lines) {
  std::ostringstream out;
  out << "policy,step,health_mean,eco_mean,loss,score\n";
  for (const auto& l : lines)
    out << l.policy << ',' << l.row.step << ',' << csv_number(l.row.health_mean) << ',' << csv_number(l.row.eco_mean)
        << ',' << csv_number(l.row.loss) << ',' << csv_number(l.row.score) << '\n';
  return out.str();
}

inline json front_json(const std::vector<FrontPoint>& pts, bool genome_refs) {
  json arr = points_to_json(pts);
  if (genome_refs)
    for (auto& p : arr) p["genome_ref"] = p["policy_ref"];
  return arr;
}

}  // namespace detail

/// Trains `cfg.algo` with `seed` and persists the run into `out_dir`, which
/// must not exist yet or be empty. The run id is the directory name.
inline RunSummary run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& out_dir,
                                 const ProgressFn& progress = {}) {
  cfg.validate();
  if (fs::exists(out_dir) && !fs::is_empty(out_dir))
    throw ArtifactError("run directory already exists and is not empty: " + out_dir.string());
  fs::create_directories(out_dir / "policies");
  auto say = [&](const std::string& m) {
    if (progress) progress(m);
  };

  RunSummary run;
  run.run_id = fs::absolute(out_dir).lexically_normal().filename().string();
  if (run.run_id.empty()) run.run_id = fs::absolute(out_dir).lexically_normal().parent_path().filename().string();
  run.algo = canonical_algorithm(cfg.algo);
  const EnvConfig env = cfg.env_config();
  auto ref = [&](const std::string& name) { return run.run_id + "/" + name; };

  json config_doc{{"format", "epiopt-run"}, {"version", 1},         {"run_id", run.run_id},
                  {"algo", run.algo},        {"seed", seed},          {"epiopt_version", EPIOPT_VERSION},
                  {"config", experiment_config_to_json(cfg)}};
  write_text_file((out_dir / "config.json").string(), dump_json(config_doc));

  std::vector<detail::LogLine> log;
  const bool is_nsga2 = run.algo == "nsga2";

  if (run.algo == "dqn") {
    for (std::size_t i = 0; i < cfg.betas.size(); ++i) {
      const double beta = cfg.betas[i];
      const std::string name = "dqn_beta_" + format_beta(beta);
      say("training " + name);
      EnvConfig e = env;
      e.goal.beta = beta;
      TrainResult r = train_dqn(e, cfg.train, derive_seed(seed ^ stream::kTrain, i));
      for (const auto& row : r.log) log.push_back({name, row});
      const StoredPolicy p = stored_from_ensemble(r.best);
      save_policy(out_dir / "policies" / name, p);
      FrontPoint f = to_point(evaluate_stored(p, env, Goal{beta, {}}, cfg.eval_episodes, cfg.eval_seed), ref(name));
      f.beta = beta;
      run.evaluations.push_back(std::move(f));
      run.policies.push_back(name);
    }
  } else if (run.algo == "goal_dqn" || run.algo == "goal_dqn_c") {
    const AgentKind kind = agent_kind_from_string(run.algo);
    say("training " + run.algo);
    TrainResult r = train_goal_agent(kind, env, cfg.train, derive_seed(seed ^ stream::kTrain, 0));
    for (const auto& row : r.log) log.push_back({run.algo, row});
    const StoredPolicy p = stored_from_ensemble(r.best);
    save_policy(out_dir / "policies" / run.algo, p);
    say("sweeping " + std::to_string(cfg.sweep_goals) + " goals");
    run.evaluations = goal_sweep(p, env, cfg.sweep_goals, cfg.eval_episodes, cfg.eval_seed, ref(run.algo));
    run.policies.push_back(run.algo);
  } else {
    const Nsga2Config ncfg = cfg.resolved_nsga2(seed);
    say("evolving " + std::to_string(ncfg.generations) + " generations");
    const Nsga2Result r = evolve_policies(env, ncfg, cfg.nsga2_hidden);
    const long steps_per_gen = static_cast<long>(ncfg.population_size) * ncfg.n_eval * env.horizon_weeks;
    for (const auto& g : r.history) {
      std::vector<FrontPoint> pts;
      for (std::size_t i = 0; i < g.front.size(); ++i) {
        FrontPoint f;
        f.health = g.front[i].fitness[0];
        f.eco = g.front[i].fitness[1];
        f.health_stderr = g.front[i].fitness_stderr[0];
        f.eco_stderr = g.front[i].fitness_stderr[1];
        f.policy_ref = ref("gen" + std::to_string(g.generation) + "_" + std::to_string(i));
        pts.push_back(std::move(f));
      }
      std::sort(pts.begin(), pts.end(), front_order);
      write_text_file((out_dir / ("pareto_gen_" + std::to_string(g.generation) + ".json")).string(),
                      dump_json(detail::front_json(pts, true)));
      TrainLogRow row;
      row.step = steps_per_gen * (g.generation + 1);
      row.health_mean = mean_of([&] { std::vector<double> v; for (const auto& p : pts) v.push_back(p.health); return v; }());
      row.eco_mean = mean_of([&] { std::vector<double> v; for (const auto& p : pts) v.push_back(p.eco); return v; }());
      log.push_back({"nsga2", row});
    }
    // Final front members are stored as policies and re-evaluated on the run's evaluation seeds.
    std::vector<Individual> members = r.front;
    std::sort(members.begin(), members.end(), [](const Individual& a, const Individual& b) {
      return std::tie(a.fitness[0], a.fitness[1]) < std::tie(b.fitness[0], b.fitness[1]);
    });
    for (std::size_t i = 0; i < members.size(); ++i) {
      const std::string name = "nsga2_" + std::to_string(i);
      const StoredPolicy p = stored_from_genome(members[i].genome, cfg.nsga2_hidden);
      save_policy(out_dir / "policies" / name, p);
      run.evaluations.push_back(
          to_point(evaluate_stored(p, env, Goal{}, cfg.eval_episodes, cfg.eval_seed), ref(name)));
      run.policies.push_back(name);
    }
  }

  run.front = build_front(run.evaluations);
  write_text_file((out_dir / "log.csv").string(), detail::log_csv(log));
  write_text_file((out_dir / "evaluations.json").string(), dump_json(detail::front_json(run.evaluations, is_nsga2)));
  write_text_file((out_dir / "pareto_final.json").string(), dump_json(detail::front_json(run.front.points, is_nsga2)));
  say("done: " + std::to_string(run.front.points.size()) + " front points");
  return run;
}

// ---------------------------------------------------------------------------
// Loading runs

struct RunArtifact {
  fs::path dir;
  std::string run_id;
  std::string algo;
  std::uint64_t seed = 0;
  std::string label;  ///< config label, or the algorithm tag
  ExperimentConfig config;
  std::vector<std::string> policies;
  std::vector<FrontPoint> evaluations;
  std::vector<FrontPoint> pareto;
  json pareto_json;  ///< pareto_final.json as stored

  EnvConfig env_config() const { return config.env_config(); }
  fs::path policy_dir(const std::string& name) const { return dir / "policies" / name; }
};

inline RunArtifact load_run(const fs::path& dir) {
  const fs::path cfg_path = dir / "config.json";
  if (!fs::exists(cfg_path)) throw ArtifactError("missing config.json in " + dir.string());
  RunArtifact a;
  a.dir = dir;
  try {
    const json doc = json::parse(read_text_file(cfg_path.string()));
    if (doc.value("format", std::string{}) != "epiopt-run") throw ArtifactError("not a run directory: " + dir.string());
    a.run_id = doc.at("run_id").get<std::string>();
    a.algo = canonical_algorithm(doc.at("algo").get<std::string>());
    a.seed = doc.at("seed").get<std::uint64_t>();
    a.config = experiment_config_from_json(doc.at("config"));
    a.label = a.config.label.empty() ? a.algo : a.config.label;
    for (const char* f : {"evaluations.json", "pareto_final.json"})
      if (!fs::exists(dir / f)) throw ArtifactError("missing " + std::string(f) + " in " + dir.string());
    a.evaluations = points_from_json(json::parse(read_text_file((dir / "evaluations.json").string())));
    a.pareto_json = json::parse(read_text_file((dir / "pareto_final.json").string()));
    a.pareto = points_from_json(a.pareto_json);
  } catch (const json::exception& e) {
    throw ArtifactError("corrupt run " + dir.string() + ": " + e.what());
  }
  if (fs::exists(dir / "policies"))
    for (const auto& entry : fs::directory_iterator(dir / "policies"))
      if (entry.is_directory()) a.policies.push_back(entry.path().filename().string());
  std::sort(a.policies.begin(), a.policies.end());
  return a;
}

/// Every run directory directly below `root`, ordered by run id.
inline std::vector<RunArtifact> load_runs(const fs::path& root) {
  std::vector<RunArtifact> runs;
  if (!fs::exists(root)) return runs;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "config.json")) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) runs.push_back(load_run(d));
  return runs;
}

/// Front over the evaluations of several runs.
inline ParetoFront union_front(const std::vector<RunArtifact>& runs) {
  std::vector<FrontPoint> all;
  for (const auto& r : runs) all.insert(all.end(), r.evaluations.begin(), r.evaluations.end());
  return build_front(std::move(all));
}

// ---------------------------------------------------------------------------
// Comparisons

struct GroupStats {
  std::string label;
  std::vector<std::string> run_ids;
  std::vector<double> areas;
  double mean = 0;
  double stddev = 0;
};

struct ComparisonReport {
  Bounds bounds;
  std::vector<GroupStats> groups;
  std::vector<std::vector<std::optional<double>>> p_values;  ///< unset when undefined (single runs that differ)
  std::vector<std::vector<bool>> significant;
  double alpha = 0.05;
};

inline double sample_stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Area under each run's front with bounds shared by every compared point,
/// grouped by label, and pairwise Welch tests on the areas.
inline ComparisonReport compare_runs(const std::vector<std::pair<std::string, std::vector<RunArtifact>>>& groups,
                                     double alpha = 0.05) {
  if (groups.empty()) throw std::invalid_argument("compare_runs: nothing to compare");
  ComparisonReport rep;
  rep.alpha = alpha;
  std::vector<ParetoFront> fronts;
  for (const auto& [_, runs] : groups)
    for (const auto& r : runs) fronts.push_back(ParetoFront{r.pareto});
  rep.bounds = bounds_of(fronts);

  for (const auto& [label, runs] : groups) {
    if (runs.empty()) throw std::invalid_argument("compare_runs: empty group " + label);
    GroupStats g;
    g.label = label;
    for (const auto& r : runs) {
      g.run_ids.push_back(r.run_id);
      g.areas.push_back(area_under_front(ParetoFront{r.pareto}, rep.bounds));
    }
    g.mean = mean_of(g.areas);
    g.stddev = sample_stddev(g.areas);
    rep.groups.push_back(std::move(g));
  }
  const std::size_t n = rep.groups.size();
  rep.p_values.assign(n, std::vector<std::optional<double>>(n));
  rep.significant.assign(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const auto& a = rep.groups[i].areas;
      const auto& b = rep.groups[j].areas;
      double p = 1.0;
      if (a.size() < 2 || b.size() < 2) {
        // No variance estimate: only identical areas give a defined answer.
        bool same = true;
        for (double x : a)
          for (double y : b) same = same && x == y;
        if (!same) continue;
      } else if (i != j) {
        p = welch_t_test(a, b).p;
      }
      rep.p_values[i][j] = p;
      rep.significant[i][j] = p < alpha;
    }
  return rep;
}

/// Groups runs by their label (config label, else algorithm tag), in first-seen order.
inline std::vector<std::pair<std::string, std::vector<RunArtifact>>> group_by_label(const std::vector<RunArtifact>& runs) {
  std::vector<std::pair<std::string, std::vector<RunArtifact>>> groups;
  for (const auto& r : runs) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == r.label; });
    if (it == groups.end()) {
      groups.push_back({r.label, {r}});
    } else {
      it->second.push_back(r);
    }
  }
  return groups;
}

inline json to_json(const ComparisonReport& r) {
  json groups = json::array();
  for (const auto& g : r.groups)
    groups.push_back({{"label", g.label}, {"runs", g.run_ids}, {"areas", g.areas}, {"mean", g.mean}, {"stddev", g.stddev}});
  json p = json::array(), sig = json::array();
  for (std::size_t i = 0; i < r.p_values.size(); ++i) {
    json prow = json::array(), srow = json::array();
    for (std::size_t j = 0; j < r.p_values[i].size(); ++j) {
      prow.push_back(r.p_values[i][j] ? json(*r.p_values[i][j]) : json(nullptr));
      srow.push_back(r.significant[i][j]);
    }
    p.push_back(prow);
    sig.push_back(srow);
  }
  return json{{"bounds",
               {{"health_min", r.bounds.health_min},
                {"health_max", r.bounds.health_max},
                {"eco_min", r.bounds.eco_min},
                {"eco_max", r.bounds.eco_max}}},
              {"alpha", r.alpha},
              {"groups", groups},
              {"p_values", p},
              {"significant", sig}};
}

/// Plain-text table of a comparison report.
inline std::string format_report(const ComparisonReport& r) {
  std::ostringstream out;
  char buf[256];
  out << "area under normalized front (lower is better)\n";
  for (const auto& g : r.groups) {
    std::snprintf(buf, sizeof buf, "  %-16s n=%zu  mean=%.4f  std=%.4f\n", g.label.c_str(), g.areas.size(), g.mean,
                  g.stddev);
    out << buf;
  }
  out << "pairwise Welch p-values (alpha=" << r.alpha << ")\n";
  for (std::size_t i = 0; i < r.groups.size(); ++i) {
    std::snprintf(buf, sizeof buf, "  %-16s", r.groups[i].label.c_str());
    out << buf;
    for (std::size_t j = 0; j < r.groups.size(); ++j) {
      if (r.p_values[i][j]) {
        std::snprintf(buf, sizeof buf, " %8.4f%s", *r.p_values[i][j], r.significant[i][j] ? "*" : " ");
      } else {
        std::snprintf(buf, sizeof buf, " %9s", "n/a");
      }
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace epiopt
