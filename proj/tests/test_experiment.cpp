#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "epiopt/experiment.hpp"

using namespace epiopt;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("epiopt_test_experiment_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d.parent_path());
  return d;
}

ExperimentConfig tiny(const std::string& algo) {
  ExperimentConfig c;
  c.algo = algo;
  c.train.total_env_steps = 1500;
  c.train.learning_starts = 200;
  c.train.eval_every = 750;
  c.train.eval_episodes = 2;
  c.train.hidden_dim = 8;
  c.betas = {0.0, 1.0};
  c.nsga2.population_size = 4;
  c.nsga2.generations = 1;
  c.nsga2.n_eval = 2;
  c.nsga2_hidden = 8;
  c.eval_episodes = 3;
  c.sweep_goals = 3;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EPIOPT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Always answers with one fixed action.
StoredPolicy constant_policy(PolicyKind kind, Action a) {
  StoredPolicy p;
  p.kind = kind;
  const int in = static_cast<int>(observation_dim(p.obs_mode()));
  const auto names = p.head_names();
  for (std::size_t h = 0; h < names.size(); ++h) {
    std::vector<double> w(MlpSpec{in, 1, 2}.param_count(), 0.0);
    // Output biases are the last two parameters; prefer `a` on cost heads.
    const bool lock = a == Action::kLockdown;
    w[w.size() - 2] = lock ? 1.0 : 0.0;
    w[w.size() - 1] = lock ? 0.0 : 1.0;
    p.heads.emplace_back(MlpSpec{in, 1, 2}, w);
  }
  return p;
}

}  // namespace

TEST(Config, DefaultsAndRoundTrip) {
  const ExperimentConfig d;
  EXPECT_EQ(d.betas.size(), 21u);
  EXPECT_EQ(d.betas.front(), 0.0);
  EXPECT_EQ(d.betas.back(), 1.0);
  EXPECT_EQ(d.eval_episodes, 30);
  EXPECT_EQ(d.sweep_goals, 100);
  EXPECT_EQ(d.onset_delay_max, 21.0);
  EXPECT_EQ(d.param_stdev_fraction, 0.10);

  ExperimentConfig c = tiny("goal-dqn-c");
  c.label = "grp";
  c.nsga2_budget = 123456;
  const json j = experiment_config_to_json(c);
  const ExperimentConfig back = experiment_config_from_json(j);
  EXPECT_EQ(back.algo, "goal_dqn_c");
  EXPECT_EQ(experiment_config_to_json(back).dump(), experiment_config_to_json(experiment_config_from_json(j)).dump());
  EXPECT_EQ(back.label, "grp");
  EXPECT_EQ(*back.nsga2_budget, 123456);
  EXPECT_EQ(back.train.total_env_steps, 1500);
}

TEST(Config, RejectsUnknownAndInvalid) {
  EXPECT_THROW(experiment_config_from_json(json{{"algo", "ppo"}}), ConfigError);
  EXPECT_THROW(experiment_config_from_json(json{{"bogus", 1}}), ConfigError);
  EXPECT_THROW(experiment_config_from_json(json{{"env", {{"horizon", 52}}}}), ConfigError);
  EXPECT_THROW(experiment_config_from_json(json{{"dqn", {{"betas", {0.5, 1.5}}}}}), ConfigError);
  EXPECT_THROW(experiment_config_from_json(json{{"evaluation", {{"episodes", 0}}}}), ConfigError);
  EXPECT_THROW(experiment_config_from_json(json{{"env", {{"onset_delay", {3}}}}}), ConfigError);
  EXPECT_THROW(experiment_config_from_json(json{{"train", {{"total_env_steps", "many"}}}}), std::exception);
  EXPECT_NO_THROW(experiment_config_from_json(json::object()));
}

TEST(Config, BudgetResolvesGenerations) {
  ExperimentConfig c;
  c.nsga2_budget = 1'000'000;
  EXPECT_EQ(c.resolved_nsga2(3).generations, 16);
  EXPECT_EQ(c.resolved_nsga2(3).seed, 3u);
}

TEST(Sweep, Betas) {
  EXPECT_EQ(sweep_betas(1), std::vector<double>{0.5});
  const auto b = sweep_betas(100);
  EXPECT_EQ(b.size(), 100u);
  EXPECT_EQ(b.front(), 0.0);
  EXPECT_EQ(b.back(), 1.0);
  EXPECT_THROW(sweep_betas(0), std::invalid_argument);
}

TEST(Sweep, ConstantPolicyGivesOnePointPerGoal) {
  const StoredPolicy lock = constant_policy(PolicyKind::kGoalDqn, Action::kLockdown);
  const EnvConfig env = ExperimentConfig{}.env_config();
  const auto pts = goal_sweep(lock, env, 4, 2, 5, "x/goal_dqn");
  ASSERT_EQ(pts.size(), 4u);
  for (const auto& p : pts) {
    // Same seeds and the same actions: identical costs for every goal.
    EXPECT_EQ(p.health, pts[0].health);
    EXPECT_EQ(p.eco, pts[0].eco);
    EXPECT_EQ(p.policy_ref, "x/goal_dqn");
  }
  EXPECT_EQ(build_front(pts).points.size(), 4u);
  EXPECT_THROW(goal_sweep(lock, env, 2, 1, 5, "x", {ConstraintSpec{30'500, std::nullopt}}), std::invalid_argument);
  EXPECT_THROW(goal_sweep(constant_policy(PolicyKind::kDqn, Action::kLockdown), env, 2, 1, 5, "x"), std::invalid_argument);
}

TEST(Run, DqnArtifactsRoundTrip) {
  const fs::path dir = fresh_dir("dqn_run");
  const RunSummary s = run_experiment(tiny("dqn"), 4, dir);
  EXPECT_EQ(s.run_id, "dqn_run");
  EXPECT_EQ(s.policies, (std::vector<std::string>{"dqn_beta_0", "dqn_beta_1"}));
  for (const char* f : {"config.json", "log.csv", "evaluations.json", "pareto_final.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;

  const RunArtifact a = load_run(dir);
  EXPECT_EQ(a.run_id, "dqn_run");
  EXPECT_EQ(a.algo, "dqn");
  EXPECT_EQ(a.seed, 4u);
  EXPECT_EQ(a.label, "dqn");
  ASSERT_EQ(a.evaluations.size(), 2u);
  // Reloaded weights reproduce the stored evaluation exactly.
  for (const auto& e : a.evaluations) {
    const std::string name = e.policy_ref.substr(e.policy_ref.find('/') + 1);
    const StoredPolicy p = load_policy(a.policy_dir(name));
    const auto again = evaluate_stored(p, a.env_config(), Goal{*e.beta, {}}, a.config.eval_episodes, a.config.eval_seed);
    EXPECT_EQ(again.health_mean, e.health);
    EXPECT_EQ(again.eco_mean, e.eco);
  }
  for (const auto& p : a.pareto)
    for (const auto& q : a.pareto) EXPECT_FALSE(dominates(q.objectives(), p.objectives()));

  EXPECT_THROW(run_experiment(tiny("dqn"), 4, dir), ArtifactError);
}

TEST(Run, SameSeedGivesIdenticalBytes) {
  for (const std::string algo : {"goal_dqn_c", "nsga2"}) {
    const fs::path a = fresh_dir("a_" + algo) / "run", b = fresh_dir("b_" + algo) / "run";
    run_experiment(tiny(algo), 9, a);
    run_experiment(tiny(algo), 9, b);
    const auto fa = files_under(a), fb = files_under(b);
    ASSERT_EQ(fa, fb) << algo;
    for (const auto& f : fa) EXPECT_EQ(slurp(a / f), slurp(b / f)) << algo << ' ' << f;
  }
}

TEST(Run, GoalSweepAndNsga2Layout) {
  const fs::path g = fresh_dir("goal"), n = fresh_dir("evo");
  run_experiment(tiny("goal_dqn"), 2, g);
  const RunArtifact ga = load_run(g);
  ASSERT_EQ(ga.evaluations.size(), 3u);
  EXPECT_EQ(*ga.evaluations[1].beta, 0.5);
  EXPECT_EQ(ga.policies, std::vector<std::string>{"goal_dqn"});

  run_experiment(tiny("nsga2"), 2, n);
  EXPECT_TRUE(fs::exists(n / "pareto_gen_0.json"));
  EXPECT_TRUE(fs::exists(n / "pareto_gen_1.json"));
  const RunArtifact na = load_run(n);
  EXPECT_FALSE(na.policies.empty());
  for (const auto& p : na.pareto_json) EXPECT_TRUE(p.contains("genome_ref"));
}

TEST(Compare, IdenticalRunsGiveUnitPValue) {
  const fs::path dir = fresh_dir("cmp");
  run_experiment(tiny("dqn"), 1, dir);
  const RunArtifact a = load_run(dir);
  const auto rep = compare_runs({{"left", {a}}, {"right", {a}}});
  ASSERT_EQ(rep.groups.size(), 2u);
  EXPECT_EQ(rep.groups[0].areas, rep.groups[1].areas);
  EXPECT_EQ(*rep.p_values[0][1], 1.0);
  EXPECT_FALSE(rep.significant[0][1]);
  // Two runs per group, identical copies.
  const auto rep2 = compare_runs({{"left", {a, a}}, {"right", {a, a}}});
  EXPECT_EQ(*rep2.p_values[0][1], 1.0);
  EXPECT_NO_THROW(to_json(rep2).dump());
  EXPECT_FALSE(format_report(rep2).empty());

  const auto groups = group_by_label(load_runs(dir.parent_path()));
  EXPECT_FALSE(groups.empty());
  const ParetoFront u = union_front({a, a});
  EXPECT_EQ(u.points.size(), 2 * a.pareto.size());
}

TEST(Cli, ExitCodesAndReproducibility) {
  const fs::path root = fresh_dir("cli");
  fs::create_directories(root);
  std::ofstream(root / "tiny.json") << R"({"train": {"total_env_steps": 1500, "learning_starts": 200, "eval_every": 750,
    "eval_episodes": 2, "hidden_dim": 8}, "evaluation": {"episodes": 2, "sweep_goals": 3}})";
  const std::string cfg = (root / "tiny.json").string();

  EXPECT_EQ(run_cli("--version"), 0);
  EXPECT_EQ(run_cli("train --algo ppo --out " + (root / "x").string()), 2);
  EXPECT_EQ(run_cli("train --algo goal-dqn --config " + cfg + " --seed 3 --quiet --out " + (root / "r1").string()), 0);
  EXPECT_EQ(run_cli("train --algo goal-dqn --config " + cfg + " --seed 3 --quiet --out " + (root / "r1").string()), 1);

  const std::string pol = (root / "r1" / "policies" / "goal_dqn").string();
  ASSERT_EQ(run_cli("simulate --policy " + pol + " --beta 0.3 --seed 17 --out " + (root / "s1.jsonl").string()), 0);
  ASSERT_EQ(run_cli("simulate --policy " + pol + " --beta 0.3 --seed 17 --out " + (root / "s2.jsonl").string()), 0);
  EXPECT_EQ(slurp(root / "s1.jsonl"), slurp(root / "s2.jsonl"));
  EXPECT_FALSE(slurp(root / "s1.jsonl").empty());
  EXPECT_EQ(run_cli("simulate --policy " + pol + " --beta 1.5 --seed 1 --out " + (root / "s3.jsonl").string()), 2);
  EXPECT_EQ(run_cli("simulate --policy " + pol + " --max-deaths 30000 --out " + (root / "s4.jsonl").string()), 2);
  EXPECT_EQ(run_cli("pareto --runs " + (root / "r1").string() + " --out " + (root / "p.json").string()), 0);
  EXPECT_EQ(run_cli("sweep --run " + (root / "r1").string() + " --n-goals 2 --episodes 1 --out " + (root / "sw.json").string()), 0);
  EXPECT_EQ(run_cli("compare --runs " + (root / "r1").string() + " --out " + (root / "c.json").string()), 0);
  EXPECT_EQ(run_cli("bogus"), 2);
}
