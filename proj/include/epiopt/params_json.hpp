#pragma once

// JSON parameter document shared by the simulator, the CLI and the service.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "epiopt/costs.hpp"
#include "epiopt/seirah.hpp"

namespace epiopt {

using json = nlohmann::json;

struct ModelParameters {
  SeirahParams seirah{};
  EconParams econ{};
};

inline void to_json(json& j, const InitialCounts& c) {
  j = json{{"E0", c.E0}, {"I0", c.I0}, {"R0", c.R0}, {"A0", c.A0}, {"H0", c.H0}};
}

inline void from_json(const json& j, InitialCounts& c) {
  c.E0 = j.at("E0").get<double>();
  c.I0 = j.at("I0").get<double>();
  c.R0 = j.at("R0").get<double>();
  c.A0 = j.at("A0").get<double>();
  c.H0 = j.at("H0").get<double>();
}

inline void to_json(json& j, const EconParams& e) {
  j = json{{"K0", e.K0}, {"L0", e.L0},  {"lambda", e.lambda_rate}, {"Y0", e.Y0},
           {"A", e.A_tech}, {"u", e.u_lockdown}, {"gamma_k", e.gamma_k}};
}

inline void from_json(const json& j, EconParams& e) {
  e.K0 = j.at("K0").get<double>();
  e.L0 = j.value("L0", e.L0);
  e.lambda_rate = j.at("lambda").get<double>();
  e.Y0 = j.at("Y0").get<double>();
  e.A_tech = j.at("A").get<double>();
  e.u_lockdown = j.at("u").get<double>();
  e.gamma_k = j.at("gamma_k").get<double>();
}

inline void to_json(json& j, const SeirahParams& p) {
  j = json{{"b0", p.b0}, {"r", p.r},   {"alpha", p.alpha}, {"De", p.De},
           {"Di", p.Di}, {"Dq", p.Dq}, {"Dh", p.Dh},       {"N", p.N},
           {"lockdown_effects", p.lockdown_effects},        {"death_rate", p.death_rate},
           {"init", p.init}};
}

inline void from_json(const json& j, SeirahParams& p) {
  p.b0 = j.at("b0").get<double>();
  p.r = j.at("r").get<double>();
  p.alpha = j.at("alpha").get<double>();
  p.De = j.at("De").get<double>();
  p.Di = j.at("Di").get<double>();
  p.Dq = j.at("Dq").get<double>();
  p.Dh = j.at("Dh").get<double>();
  p.N = j.at("N").get<double>();
  p.lockdown_effects = j.at("lockdown_effects").get<std::array<double, 4>>();
  p.death_rate = j.value("death_rate", 0.005);
  p.init = j.at("init").get<InitialCounts>();
}

inline json parameters_to_json(const ModelParameters& m) {
  json j = m.seirah;
  j["econ"] = m.econ;
  return j;
}

inline ModelParameters parameters_from_json(const json& j) {
  ModelParameters m;
  m.seirah = j.get<SeirahParams>();
  if (j.contains("econ")) m.econ = j.at("econ").get<EconParams>();
  m.seirah.validate();
  m.econ.validate();
  return m;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

inline ModelParameters load_parameters(const std::string& path) {
  return parameters_from_json(json::parse(read_text_file(path)));
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Digest of the canonical (key-sorted, compact) serialization.
inline std::string parameters_digest(const ModelParameters& m) {
  return fnv1a_hex(parameters_to_json(m).dump());
}

}  // namespace epiopt
