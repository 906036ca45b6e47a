#pragma once

// Pareto fronts of evaluated policies (deaths x euros, both minimised), the
// normalized staircase area under a front, and 2-d hypervolume.

#include <algorithm>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "epiopt/costs.hpp"
#include "epiopt/nsga2.hpp"

namespace epiopt {

/// One evaluated policy (or goal-conditioned policy at one goal).
struct FrontPoint {
  double health = 0;         ///< mean deaths
  double eco = 0;            ///< mean euros
  double health_stderr = 0;
  double eco_stderr = 0;
  std::string policy_ref;
  std::optional<double> beta;
  ConstraintSpec constraints{};

  Objectives objectives() const { return {health, eco}; }
};

struct Bounds {
  double health_min = 0, health_max = 0;
  double eco_min = 0, eco_max = 0;
};

struct ParetoFront {
  std::vector<FrontPoint> points;  ///< pairwise non-dominated, sorted by (health, eco)
};

inline bool front_order(const FrontPoint& a, const FrontPoint& b) {
  return std::tie(a.health, a.eco, a.policy_ref, a.beta) < std::tie(b.health, b.eco, b.policy_ref, b.beta);
}

/// Keeps exactly the non-dominated points. Output order does not depend on input order.
inline ParetoFront build_front(std::vector<FrontPoint> evaluated) {
  std::vector<Objectives> pts;
  pts.reserve(evaluated.size());
  for (const auto& p : evaluated) pts.push_back(p.objectives());
  ParetoFront f;
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < evaluated.size() && !dominated; ++j) dominated = dominates(pts[j], pts[i]);
    if (!dominated) f.points.push_back(evaluated[i]);
  }
  std::sort(f.points.begin(), f.points.end(), front_order);
  return f;
}

inline Bounds bounds_of(std::span<const FrontPoint> pts) {
  Bounds b;
  if (pts.empty()) return b;
  b.health_min = b.eco_min = std::numeric_limits<double>::infinity();
  b.health_max = b.eco_max = -std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    b.health_min = std::min(b.health_min, p.health);
    b.health_max = std::max(b.health_max, p.health);
    b.eco_min = std::min(b.eco_min, p.eco);
    b.eco_max = std::max(b.eco_max, p.eco);
  }
  return b;
}

inline Bounds bounds_of(const std::vector<ParetoFront>& fronts) {
  std::vector<FrontPoint> all;
  for (const auto& f : fronts) all.insert(all.end(), f.points.begin(), f.points.end());
  return bounds_of(all);
}

/// Min-max normalization; a degenerate axis maps to 0.
inline double normalize_value(double v, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return (v - lo) / (hi - lo);
}

inline std::vector<Objectives> normalized_points(const ParetoFront& f, const Bounds& b) {
  std::vector<Objectives> out;
  out.reserve(f.points.size());
  for (const auto& p : f.points)
    out.push_back({normalize_value(p.health, b.health_min, b.health_max), normalize_value(p.eco, b.eco_min, b.eco_max)});
  return out;
}

/// Staircase area of normalized points (x = first objective). The envelope
/// is 1 left of the first point, then steps down at each point and runs to
/// x = 1 at the last point's height. Lower is better.
inline double staircase_area(std::vector<Objectives> pts) {
  if (pts.empty()) return 1.0;
  std::sort(pts.begin(), pts.end());
  double area = pts.front()[0] * 1.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) area += (pts[i + 1][0] - pts[i][0]) * pts[i][1];
  area += (1.0 - pts.back()[0]) * pts.back()[1];
  return area;
}

inline double area_under_front(const ParetoFront& f, const Bounds& b) {
  return staircase_area(normalized_points(f, b));
}

/// Area dominated by `pts` inside the box bounded by `ref` (minimisation).
inline double hypervolume_2d(std::vector<Objectives> pts, const Objectives& ref) {
  std::erase_if(pts, [&](const Objectives& p) { return !(p[0] < ref[0] && p[1] < ref[1]); });
  if (pts.empty()) return 0.0;
  std::sort(pts.begin(), pts.end());
  double hv = 0.0;
  double best_y = ref[1];
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i][1] >= best_y) continue;
    // Strip from this x to the next improving x (or ref) at height ref - y.
    double next_x = ref[0];
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (pts[j][1] < pts[i][1]) {
        next_x = pts[j][0];
        break;
      }
    hv += (next_x - pts[i][0]) * (ref[1] - pts[i][1]);
    best_y = pts[i][1];
  }
  return hv;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const FrontPoint& p) {
  nlohmann::json j{{"policy_ref", p.policy_ref},       {"health_mean", p.health},
                   {"eco_mean", p.eco},                {"health_stderr", p.health_stderr},
                   {"eco_stderr", p.eco_stderr}};
  if (p.beta) j["beta"] = *p.beta;
  if (p.constraints.max_deaths) j["max_deaths"] = *p.constraints.max_deaths;
  if (p.constraints.max_eco) j["max_eco"] = *p.constraints.max_eco;
  return j;
}

inline FrontPoint front_point_from_json(const nlohmann::json& j) {
  FrontPoint p;
  p.policy_ref = j.at("policy_ref").get<std::string>();
  p.health = j.at("health_mean").get<double>();
  p.eco = j.at("eco_mean").get<double>();
  p.health_stderr = j.value("health_stderr", 0.0);
  p.eco_stderr = j.value("eco_stderr", 0.0);
  if (j.contains("beta")) p.beta = j.at("beta").get<double>();
  if (j.contains("max_deaths")) p.constraints.max_deaths = j.at("max_deaths").get<double>();
  if (j.contains("max_eco")) p.constraints.max_eco = j.at("max_eco").get<double>();
  return p;
}

inline nlohmann::json points_to_json(std::span<const FrontPoint> pts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : pts) arr.push_back(to_json(p));
  return arr;
}

inline std::vector<FrontPoint> points_from_json(const nlohmann::json& arr) {
  std::vector<FrontPoint> out;
  for (const auto& j : arr) out.push_back(front_point_from_json(j));
  return out;
}

}  // namespace epiopt
