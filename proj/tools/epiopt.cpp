// epiopt: train, evaluate, compare and serve lockdown policies.
//
// Exit status: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "epiopt/experiment.hpp"
#include "epiopt/service.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;
using namespace epiopt;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text_file(out, text);
    std::cerr << "wrote " << out << '\n';
  }
}

// Environment a stored policy was trained in: the run config two levels up
// when present, else the defaults. --params replaces the model means.
EnvConfig policy_env(const fs::path& policy_path, const std::string& params_file) {
  const fs::path dir = fs::is_directory(policy_path) ? policy_path : policy_path.parent_path();
  ExperimentConfig cfg;
  const fs::path run_dir = fs::absolute(dir).lexically_normal().parent_path().parent_path();
  if (fs::exists(run_dir / "config.json")) cfg = load_run(run_dir).config;
  if (!params_file.empty()) cfg.params = load_parameters(params_file);
  return cfg.env_config();
}

int cmd_train(const std::string& algo, const std::string& config, std::uint64_t seed, const std::string& out,
              bool quiet) {
  ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : load_experiment_config(config);
  cfg.algo = canonical_algorithm(algo);
  cfg.validate();
  const auto run = run_experiment(cfg, seed, out, [&](const std::string& m) {
    if (!quiet) std::cerr << m << '\n';
  });
  std::cout << run.run_id << ": " << run.policies.size() << " policies, " << run.front.points.size()
            << " front points\n";
  return 0;
}

int cmd_sweep(const std::string& run_dir, int n_goals, std::optional<int> episodes, const std::string& out) {
  const RunArtifact run = load_run(run_dir);
  std::optional<std::string> name;
  for (const auto& p : run.policies)
    if (load_policy(run.policy_dir(p)).goal_conditioned()) name = p;
  if (!name) throw UsageError("run " + run.run_id + " holds no goal-conditioned policy");
  const StoredPolicy policy = load_policy(run.policy_dir(*name));
  const auto pts = goal_sweep(policy, run.env_config(), n_goals, episodes.value_or(run.config.eval_episodes),
                              run.config.eval_seed, run.run_id + "/" + *name);
  emit(dump_json(points_to_json(pts)), out);
  return 0;
}

int cmd_pareto(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<RunArtifact> runs;
  for (const auto& d : dirs) runs.push_back(load_run(d));
  const ParetoFront front = union_front(runs);
  emit(dump_json(json{{"runs", [&] {
                         std::vector<std::string> ids;
                         for (const auto& r : runs) ids.push_back(r.run_id);
                         return ids;
                       }()},
                      {"points", points_to_json(front.points)}}),
       out);
  return 0;
}

// Tokens are `label=dir[,dir...]` or a bare directory grouped by its run label.
int cmd_compare(const std::vector<std::string>& tokens, const std::string& out) {
  std::vector<std::pair<std::string, std::vector<RunArtifact>>> groups;
  std::vector<RunArtifact> unlabeled;
  for (const auto& t : tokens) {
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      unlabeled.push_back(load_run(t));
      continue;
    }
    std::vector<RunArtifact> runs;
    std::stringstream ss(t.substr(eq + 1));
    for (std::string d; std::getline(ss, d, ',');)
      if (!d.empty()) runs.push_back(load_run(d));
    if (runs.empty()) throw UsageError("empty group: " + t);
    groups.push_back({t.substr(0, eq), std::move(runs)});
  }
  for (auto& g : group_by_label(unlabeled)) groups.push_back(std::move(g));
  const ComparisonReport rep = compare_runs(groups);
  std::cout << format_report(rep);
  if (!out.empty()) emit(dump_json(to_json(rep)), out);
  return 0;
}

int cmd_simulate(const std::string& policy_path, std::optional<double> beta, std::optional<double> max_deaths,
                 std::optional<double> max_eco, std::uint64_t seed, const std::string& out,
                 const std::string& params_file) {
  const StoredPolicy p = load_policy(policy_path);
  if (beta && !p.goal_conditioned()) throw UsageError("--beta given for a fixed-beta policy");
  if ((max_deaths || max_eco) && !p.constraint_aware()) throw UsageError("constraints given for a policy without constraint heads");
  if (beta && !(*beta >= 0 && *beta <= 1)) throw UsageError("--beta must lie in [0, 1]");
  Goal goal{beta.value_or(0.5), ConstraintSpec{max_deaths, max_eco}};
  goal.validate();
  const Episode e = run_episode(p, policy_env(policy_path, params_file), goal, seed);
  std::ostringstream jsonl;
  write_jsonl(jsonl, e.records);
  emit(jsonl.str(), out);
  const auto& last = e.records.back().costs;
  std::fprintf(stderr, "deaths %.1f  eco %.4g  onset delay %.3f d\n", last.health_cum, last.eco_cum, e.model.onset_delay);
  return 0;
}

int cmd_serve(const std::string& host, int port, const std::string& runs, const std::string& params,
              const std::string& origin) {
  Service::Options opt;
  opt.runs_dir = runs;
  opt.params = load_parameters(params);
  opt.cors_origin = origin;
  const Service svc(opt);
  httplib::Server server;
  attach(server, svc);
  std::cerr << "serving " << svc.run_count() << " runs on http://" << host << ':' << port << '\n';
  if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lockdown policy optimisation on a SEIRAH epidemic model"};
  app.set_version_flag("--version", std::string(EPIOPT_VERSION));
  app.require_subcommand(1);

  std::string algo, config, out, run_dir, policy, params, host = "127.0.0.1", origin = "*";
  std::uint64_t seed = 0;
  bool quiet = false;
  int n_goals = 100, port = 8080;
  std::optional<int> episodes;
  std::optional<double> beta, max_deaths, max_eco;
  std::vector<std::string> runs;
  std::string runs_root;

  auto* train = app.add_subcommand("train", "train one algorithm and persist a run directory");
  train->add_option("--algo", algo, "dqn | goal-dqn | goal-dqn-c | nsga2")->required();
  train->add_option("--config", config, "experiment config JSON (defaults when omitted)")->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "master seed")->capture_default_str();
  train->add_option("--out", out, "run directory (must not exist or be empty)")->required();
  train->add_flag("--quiet", quiet, "no progress output");

  auto* sweep = app.add_subcommand("sweep", "evaluate a goal-conditioned policy over uniform mixtures");
  sweep->add_option("--run", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  sweep->add_option("--n-goals", n_goals, "number of mixtures")->capture_default_str()->check(CLI::PositiveNumber);
  sweep->add_option("--episodes", episodes, "episodes per mixture (default: the run's)");
  sweep->add_option("--out", out, "output JSON (stdout when omitted)");

  auto* pareto = app.add_subcommand("pareto", "union front over runs");
  pareto->add_option("--runs", runs, "run directories")->required()->expected(1, -1);
  pareto->add_option("--out", out, "output JSON (stdout when omitted)");

  auto* compare = app.add_subcommand("compare", "front areas and Welch tests between groups of runs");
  compare->add_option("--runs", runs, "label=dir,dir... or run directories grouped by label")->required()->expected(1, -1);
  compare->add_option("--out", out, "report JSON");

  auto* simulate = app.add_subcommand("simulate", "roll out one stored policy for a year");
  simulate->add_option("--policy", policy, "policy directory or policy.json")->required()->check(CLI::ExistingPath);
  simulate->add_option("--beta", beta, "mixture, goal-conditioned policies only");
  simulate->add_option("--max-deaths", max_deaths, "death bound, constrained policies only");
  simulate->add_option("--max-eco", max_eco, "economic bound in euros, constrained policies only");
  simulate->add_option("--seed", seed, "episode seed")->capture_default_str();
  simulate->add_option("--out", out, "trajectory JSONL (stdout when omitted)");
  simulate->add_option("--params", params, "model parameter JSON")->check(CLI::ExistingFile);

  auto* serve = app.add_subcommand("serve", "HTTP API over a directory of runs");
  serve->add_option("--port", port, "TCP port")->capture_default_str();
  serve->add_option("--host", host, "bind address")->capture_default_str();
  serve->add_option("--runs", runs_root, "directory holding run directories")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--params", params, "model parameter JSON")->default_str(EPIOPT_DEFAULT_PARAMS);
  serve->add_option("--cors-origin", origin, "Access-Control-Allow-Origin value")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) return cmd_train(algo, config, seed, out, quiet);
    if (*sweep) return cmd_sweep(run_dir, n_goals, episodes, out);
    if (*pareto) return cmd_pareto(runs, out);
    if (*compare) return cmd_compare(runs, out);
    if (*simulate) return cmd_simulate(policy, beta, max_deaths, max_eco, seed, out, params);
    if (*serve) return cmd_serve(host, port, runs_root, params.empty() ? EPIOPT_DEFAULT_PARAMS : params, origin);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
