#pragma once

// Read-only HTTP API over run directories.
//
//   GET  /api/health               "ok"
//   GET  /api/meta                 name, version, parameter digest
//   GET  /api/runs                 run summaries
//   GET  /api/runs/{id}/pareto     final front of one run
//   POST /api/episodes             on-demand rollout of a stored policy
//
// Routing lives in Service::handle so it can be exercised without sockets;
// attach() only adapts it to httplib.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "epiopt/artifact.hpp"
#include "epiopt/env.hpp"
#include "epiopt/experiment.hpp"
#include "epiopt/params_json.hpp"
#include "epiopt/pareto.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro that
// collides with Eigen parameter names.
#include <httplib.h>

namespace epiopt {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::uint64_t kMaxSeed = (std::uint64_t{1} << 53) - 1;

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

inline HttpResponse json_response(int status, const json& j) { return {status, "application/json", j.dump()}; }

inline HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, json{{"error", {{"status", status}, {"message", message}}}});
}

struct EpisodeRequest {
  std::string policy_ref;
  std::optional<double> beta;
  std::optional<double> max_deaths;
  std::optional<double> max_eco;
  std::optional<std::uint64_t> seed;
};

/// Rollout of one stored policy; the shared body of POST /api/episodes and `simulate`.
struct Episode {
  std::uint64_t seed = 0;
  Goal goal;
  std::vector<WeekRecord> records;
  SampledModel model;
};

inline Episode run_episode(const StoredPolicy& p, const EnvConfig& base, const Goal& goal, std::uint64_t seed) {
  const EnvConfig cfg = p.env_for(base, goal);
  EpidemicEnv env(cfg);
  Episode e;
  e.seed = seed;
  e.goal = cfg.goal;
  e.records = rollout(env, [&](const Observation& o) { return p.act(o, cfg.goal); }, seed);
  e.model = env.model();
  return e;
}

inline json episode_to_json(const Episode& e, const std::string& policy_ref) {
  json records = json::array();
  int locked = 0;
  for (const auto& r : e.records) {
    records.push_back(to_json(r));
    locked += r.action == Action::kLockdown;
  }
  const auto& last = e.records.back().costs;
  json constraints = json::object();
  if (e.goal.constraints.max_deaths) constraints["max_deaths"] = *e.goal.constraints.max_deaths;
  if (e.goal.constraints.max_eco) constraints["max_eco"] = *e.goal.constraints.max_eco;
  const json params = e.model.params;
  return json{{"policy_ref", policy_ref},
              {"seed", e.seed},
              {"beta", e.goal.beta},
              {"constraints", constraints},
              {"records", records},
              {"totals",
               {{"health_cum", last.health_cum},
                {"eco_cum", last.eco_cum},
                {"lockdown_fraction", static_cast<double>(locked) / static_cast<double>(e.records.size())}}},
              {"model",
               {{"params_digest", fnv1a_hex(params.dump())}, {"onset_delay", e.model.onset_delay}, {"params", params}}}};
}

class Service {
 public:
  struct Options {
    fs::path runs_dir;
    ModelParameters params{};
    std::string cors_origin = "*";
  };

  explicit Service(Options opt) : opt_(std::move(opt)), digest_(parameters_digest(opt_.params)) {
    for (auto& run : load_runs(opt_.runs_dir)) {
      for (const auto& name : run.policies)
        policies_.emplace(run.run_id + "/" + name, LoadedPolicy{load_policy(run.policy_dir(name)), run.run_id});
      const std::string id = run.run_id;
      runs_.emplace(id, std::move(run));
    }
  }

  const Options& options() const { return opt_; }
  std::size_t run_count() const { return runs_.size(); }

  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body = {}) const {
    try {
      if (path == "/api/health") {
        if (method != "GET") return error_response(405, "method not allowed");
        return {200, "text/plain", "ok"};
      }
      if (path == "/api/meta") {
        if (method != "GET") return error_response(405, "method not allowed");
        return json_response(200, meta());
      }
      if (path == "/api/runs") {
        if (method != "GET") return error_response(405, "method not allowed");
        return json_response(200, runs());
      }
      static const std::string prefix = "/api/runs/", suffix = "/pareto";
      if (path.starts_with(prefix) && path.ends_with(suffix) && path.size() > prefix.size() + suffix.size()) {
        if (method != "GET") return error_response(405, "method not allowed");
        return pareto(path.substr(prefix.size(), path.size() - prefix.size() - suffix.size()));
      }
      if (path == "/api/episodes") {
        if (method != "POST") return error_response(405, "method not allowed");
        return episodes(body);
      }
      return error_response(404, "no such endpoint: " + path);
    } catch (const std::exception& e) {
      return error_response(500, e.what());
    }
  }

  json meta() const {
    return json{{"name", "epiopt"},
                {"version", EPIOPT_VERSION},
                {"params_digest", digest_},
                {"schema_version", kSchemaVersion}};
  }

  json runs() const {
    json out = json::array();
    for (const auto& [id, r] : runs_)
      out.push_back({{"run_id", id},
                     {"algo", r.algo},
                     {"label", r.label},
                     {"seed", r.seed},
                     {"policies", r.policies},
                     {"n_points", r.pareto.size()}});
    return out;
  }

  HttpResponse pareto(const std::string& run_id) const {
    const auto it = runs_.find(run_id);
    if (it == runs_.end()) return error_response(404, "unknown run: " + run_id);
    const auto& pts = it->second.pareto;
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = 0; j < pts.size(); ++j)
        if (i != j && dominates(pts[i].objectives(), pts[j].objectives()))
          return error_response(500, "stored front of " + run_id + " has dominated points");
    return json_response(200, json{{"run_id", run_id}, {"algo", it->second.algo}, {"points", it->second.pareto_json}});
  }

  /// Parses and range-checks a request. Returns an error response on failure.
  static std::variant<EpisodeRequest, HttpResponse> parse_request(const std::string& body) {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::parse_error&) {
      return error_response(400, "request body is not valid JSON");
    }
    if (!j.is_object()) return error_response(400, "request must be a JSON object");
    for (const auto& [key, _] : j.items())
      if (key != "policy_ref" && key != "beta" && key != "max_deaths" && key != "max_eco" && key != "seed")
        return error_response(400, "unknown field: " + key);
    EpisodeRequest r;
    if (!j.contains("policy_ref") || !j["policy_ref"].is_string()) return error_response(400, "policy_ref is required");
    r.policy_ref = j["policy_ref"].get<std::string>();
    auto number = [&](const char* key, std::optional<double>& out) -> bool {
      if (!j.contains(key) || j[key].is_null()) return true;
      if (!j[key].is_number()) return false;
      out = j[key].get<double>();
      return true;
    };
    if (!number("beta", r.beta) || (r.beta && !(*r.beta >= 0.0 && *r.beta <= 1.0)))
      return error_response(400, "beta must be a number in [0, 1]");
    if (!number("max_deaths", r.max_deaths) ||
        (r.max_deaths && !(*r.max_deaths >= kMinDeathsBound && *r.max_deaths <= kMaxDeathsBound)))
      return error_response(400, "max_deaths must lie in [1000, 62000]");
    if (!number("max_eco", r.max_eco) || (r.max_eco && !(*r.max_eco >= kMinEcoBound && *r.max_eco <= kMaxEcoBound)))
      return error_response(400, "max_eco must lie in [2e10, 1.6e11]");
    if (j.contains("seed") && !j["seed"].is_null()) {
      if (!j["seed"].is_number_unsigned() || j["seed"].get<std::uint64_t>() > kMaxSeed)
        return error_response(400, "seed must be an integer in [0, 2^53 - 1]");
      r.seed = j["seed"].get<std::uint64_t>();
    }
    return r;
  }

  HttpResponse episodes(const std::string& body) const {
    auto parsed = parse_request(body);
    if (auto* err = std::get_if<HttpResponse>(&parsed)) return *err;
    const auto& req = std::get<EpisodeRequest>(parsed);
    const auto it = policies_.find(req.policy_ref);
    if (it == policies_.end()) return error_response(404, "unknown policy: " + req.policy_ref);
    const StoredPolicy& p = it->second.policy;
    if (req.beta && !p.goal_conditioned()) return error_response(422, "beta given for a fixed-beta policy");
    if ((req.max_deaths || req.max_eco) && !p.constraint_aware())
      return error_response(422, "constraints given for a policy without constraint heads");

    Goal goal;
    goal.beta = req.beta.value_or(0.5);
    goal.constraints = ConstraintSpec{req.max_deaths, req.max_eco};
    const std::uint64_t seed = req.seed ? *req.seed : random_seed();
    const Episode e = run_episode(p, env_for_run(it->second.run_id), goal, seed);
    return json_response(200, episode_to_json(e, req.policy_ref));
  }

  /// The run's environment, with model means from the service's parameter file.
  EnvConfig env_for_run(const std::string& run_id) const {
    ExperimentConfig c = runs_.at(run_id).config;
    c.params = opt_.params;
    return c.env_config();
  }

 private:
  struct LoadedPolicy {
    StoredPolicy policy;
    std::string run_id;
  };

  static std::uint64_t random_seed() {
    std::random_device rd;
    return ((std::uint64_t{rd()} << 32) ^ rd()) & kMaxSeed;
  }

  Options opt_;
  std::string digest_;
  std::map<std::string, RunArtifact> runs_;
  std::map<std::string, LoadedPolicy> policies_;
};

/// Binds `svc` to an httplib server. The caller owns both and calls listen().
inline void attach(httplib::Server& server, const Service& svc) {
  const std::string origin = svc.options().cors_origin;
  auto cors = [origin](httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  };
  auto forward = [&svc, cors](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = svc.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
    cors(res);
  };
  server.Get(R"(/api/.*)", forward);
  server.Post(R"(/api/.*)", forward);
  server.Options(R"(/api/.*)", [cors](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    cors(res);
  });
}

}  // namespace epiopt
