#pragma once

// Stored policies: a directory holding policy.json (kind, mixture, head list)
// and one weights_<head>.json per network.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "epiopt/dqn.hpp"
#include "epiopt/nsga2.hpp"
#include "epiopt/params_json.hpp"
#include "epiopt/policy.hpp"

namespace epiopt {

namespace fs = std::filesystem;

enum class PolicyKind { kDqn, kGoalDqn, kGoalDqnC, kNsga2 };

inline std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::kDqn: return "dqn";
    case PolicyKind::kGoalDqn: return "goal_dqn";
    case PolicyKind::kGoalDqnC: return "goal_dqn_c";
    case PolicyKind::kNsga2: return "nsga2";
  }
  return "dqn";
}

inline PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "nsga2") return PolicyKind::kNsga2;
  switch (agent_kind_from_string(s)) {
    case AgentKind::kDqn: return PolicyKind::kDqn;
    case AgentKind::kGoalDqn: return PolicyKind::kGoalDqn;
    case AgentKind::kGoalDqnC: return PolicyKind::kGoalDqnC;
  }
  return PolicyKind::kDqn;
}

class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loaded policy of any kind. Immutable once built.
struct StoredPolicy {
  PolicyKind kind = PolicyKind::kDqn;
  std::optional<double> beta;  ///< training mixture of a fixed-beta DQN
  std::vector<Mlp> heads;

  bool goal_conditioned() const { return kind == PolicyKind::kGoalDqn || kind == PolicyKind::kGoalDqnC; }
  bool constraint_aware() const { return kind == PolicyKind::kGoalDqnC; }

  ObservationMode obs_mode() const {
    switch (kind) {
      case PolicyKind::kGoalDqn: return ObservationMode::kGoal;
      case PolicyKind::kGoalDqnC: return ObservationMode::kGoalConstrained;
      default: return ObservationMode::kBase;
    }
  }

  std::vector<std::string> head_names() const {
    switch (kind) {
      case PolicyKind::kDqn: return epiopt::head_names(AgentKind::kDqn);
      case PolicyKind::kGoalDqn: return epiopt::head_names(AgentKind::kGoalDqn);
      case PolicyKind::kGoalDqnC: return epiopt::head_names(AgentKind::kGoalDqnC);
      case PolicyKind::kNsga2: return {"policy"};
    }
    return {};
  }

  Action act(const Observation& o, const Goal& goal) const {
    switch (kind) {
      case PolicyKind::kDqn: return QEnsemble{AgentKind::kDqn, beta.value_or(0.5), heads}.act(o, goal);
      case PolicyKind::kGoalDqn: return select_action_goal(heads[0].forward(o), heads[1].forward(o), goal.beta);
      case PolicyKind::kGoalDqnC:
        return select_action_constrained(heads[0].forward(o), heads[1].forward(o), heads[2].forward(o),
                                         heads[3].forward(o), goal.beta, active_constraints(goal.constraints));
      case PolicyKind::kNsga2: return genome_action(heads[0], o);
    }
    return Action::kNoLockdown;
  }

  /// Environment configuration this policy acts in, with the given goal.
  EnvConfig env_for(EnvConfig base, const Goal& goal) const {
    base.obs_mode = obs_mode();
    base.goal = goal;
    if (!goal_conditioned()) base.goal.beta = beta.value_or(goal.beta);
    return base;
  }

  void validate() const {
    if (heads.size() != head_names().size()) throw ArtifactError("policy: wrong number of heads");
    const auto dim = static_cast<int>(observation_dim(obs_mode()));
    for (const auto& h : heads)
      if (h.spec().input_dim != dim || h.spec().output_dim != kNumActions)
        throw ArtifactError("policy: head dimensions do not match its kind");
  }
};

inline StoredPolicy stored_from_ensemble(const QEnsemble& q) {
  StoredPolicy p;
  switch (q.kind) {
    case AgentKind::kDqn:
      p.kind = PolicyKind::kDqn;
      p.beta = q.beta;
      break;
    case AgentKind::kGoalDqn: p.kind = PolicyKind::kGoalDqn; break;
    case AgentKind::kGoalDqnC: p.kind = PolicyKind::kGoalDqnC; break;
  }
  p.heads = q.heads;
  return p;
}

inline StoredPolicy stored_from_genome(const std::vector<double>& genome, int hidden_dim = 64) {
  StoredPolicy p;
  p.kind = PolicyKind::kNsga2;
  p.heads.emplace_back(MlpSpec{static_cast<int>(obs::kBaseDim), hidden_dim, kNumActions}, genome);
  return p;
}

inline nlohmann::json policy_manifest(const StoredPolicy& p) {
  nlohmann::json j{{"format", "epiopt-policy"}, {"version", 1}, {"kind", to_string(p.kind)}};
  if (p.beta) j["beta"] = *p.beta;
  nlohmann::json heads = nlohmann::json::array();
  for (const auto& name : p.head_names()) heads.push_back({{"name", name}, {"file", "weights_" + name + ".json"}});
  j["heads"] = heads;
  j["obs_dim"] = observation_dim(p.obs_mode());
  return j;
}

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline void save_policy(const fs::path& dir, const StoredPolicy& p) {
  p.validate();
  fs::create_directories(dir);
  write_text_file((dir / "policy.json").string(), dump_json(policy_manifest(p)));
  const auto names = p.head_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    write_text_file((dir / ("weights_" + names[i] + ".json")).string(), dump_json(to_json(p.heads[i])));
}

/// Accepts a policy directory or the path of its policy.json.
inline StoredPolicy load_policy(const fs::path& where) {
  const fs::path dir = fs::is_directory(where) ? where : where.parent_path();
  const fs::path manifest = dir / "policy.json";
  if (!fs::exists(manifest)) throw ArtifactError("no policy.json in " + dir.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(manifest.string()));
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("unreadable policy.json: " + std::string(e.what()));
  }
  if (j.value("format", std::string{}) != "epiopt-policy") throw ArtifactError("not an epiopt policy manifest");
  StoredPolicy p;
  p.kind = policy_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("beta")) p.beta = j.at("beta").get<double>();
  for (const auto& h : j.at("heads")) {
    const fs::path file = dir / h.at("file").get<std::string>();
    if (!fs::exists(file)) throw ArtifactError("missing weight file " + file.string());
    p.heads.push_back(parse_weights(read_text_file(file.string())));
  }
  p.validate();
  return p;
}

}  // namespace epiopt
