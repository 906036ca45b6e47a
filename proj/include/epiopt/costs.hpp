#pragma once

// Health and economic costs of an epidemic step, their scaling and convex
// mixing, and the cumulative-cost constraints.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>

#include "epiopt/seirah.hpp"

namespace epiopt {

/// Cobb-Douglas economy. Money in million euros, labour in million workers.
struct EconParams {
  double K0 = 1'388'912.0;    ///< capital stock (million EUR)
  double lambda_rate = 0.374; ///< employment rate
  double Y0 = 424'474.0;      ///< annual GDP (million EUR / year)
  double A_tech = 867.0;      ///< exogenous technical progress
  double u_lockdown = 0.5;    ///< partial unemployment under lockdown
  double gamma_k = 0.37;      ///< capital elasticity
  double L0 = 4.58;           ///< reference employed population (million), informational

  void validate() const {
    auto unit = [](double v) { return v >= 0 && v <= 1; };
    if (!unit(lambda_rate) || !unit(u_lockdown) || !unit(gamma_k))
      throw std::invalid_argument("EconParams: rates must lie in [0, 1]");
    if (K0 <= 0 || Y0 <= 0 || A_tech <= 0)
      throw std::invalid_argument("EconParams: magnitudes must be > 0");
  }
};

inline constexpr double kMillion = 1e6;
inline constexpr double kDaysPerYear = 365.0;

/// Normalizers applied before mixing the two costs.
struct CostScales {
  double health = 65e3;  ///< deaths
  double eco = 1e9;      ///< euros

  /// Scales as published: deaths / 65e3 and euros / 1e9.
  static constexpr CostScales published() { return {65e3, 1e9}; }
  /// Euros scaled by the full-year lockdown cost so both costs span ~[0, 1].
  static constexpr CostScales balanced() { return {65e3, 150e9}; }
};

struct ConstraintSpec {
  std::optional<double> max_deaths;  ///< persons
  std::optional<double> max_eco;     ///< euros

  bool any() const noexcept { return max_deaths.has_value() || max_eco.has_value(); }
  bool operator==(const ConstraintSpec&) const = default;
};

// Ranges used when sampling constraints during training.
inline constexpr double kMinDeathsBound = 1000.0;
inline constexpr double kMaxDeathsBound = 62000.0;
inline constexpr double kMinEcoBound = 20e9;
inline constexpr double kMaxEcoBound = 160e9;

/// The agent's view of a constraint: a bound at or above the top of its range
/// means no constraint.
inline ConstraintSpec effective_constraints(const ConstraintSpec& c) {
  ConstraintSpec e = c;
  if (e.max_deaths && *e.max_deaths >= kMaxDeathsBound) e.max_deaths.reset();
  if (e.max_eco && *e.max_eco >= kMaxEcoBound) e.max_eco.reset();
  return e;
}

struct ConstraintFlags {
  bool deaths = false;
  bool eco = false;

  bool any() const noexcept { return deaths || eco; }
  bool operator==(const ConstraintFlags&) const = default;
};

struct CostSnapshot {
  double health_step = 0;  ///< deaths this step
  double eco_step = 0;     ///< euros lost this step
  double health_cum = 0;
  double eco_cum = 0;
  double aggregated = 0;   ///< mixed, scaled step cost
  ConstraintFlags violations{};
};

// ---------------------------------------------------------------------------

/// Deaths caused between two states: death_rate times the growth of R.
inline double health_cost_step(const SeirahState& prev, const SeirahState& next,
                               const SeirahParams& p) {
  const double dR = next.R - prev.R;
  if (dR < -1e-9 * p.N) throw std::logic_error("health_cost_step: R decreased");
  return p.death_rate * std::max(dR, 0.0);
}

/// Ill, isolated or dead population.
inline double unavailable_population(const SeirahState& s, const SeirahParams& p) noexcept {
  return s.I + s.H + p.death_rate * s.R;
}

/// Employed population in millions under unemployment level `u`.
inline double workforce(const SeirahState& s, double u, const EconParams& econ,
                        const SeirahParams& p) {
  if (u < 0 || u > 1) throw std::invalid_argument("workforce: u must lie in [0, 1]");
  const double G = unavailable_population(s, p);
  return (1.0 - u) * econ.lambda_rate * (p.N - G) / kMillion;
}

/// Output in million EUR / year for `L` million workers.
inline double gdp(double L, const EconParams& econ) {
  if (L < 0) throw std::invalid_argument("gdp: negative labour");
  return econ.A_tech * std::pow(econ.K0, econ.gamma_k) * std::pow(L, 1.0 - econ.gamma_k);
}

/// GDP shortfall in euros accrued over the given daily states (one day each).
inline double economic_cost_step(std::span<const SeirahState> daily, bool lockdown,
                                 const EconParams& econ, const SeirahParams& p) {
  const double u = lockdown ? econ.u_lockdown : 0.0;
  double loss_million = 0.0;
  for (const SeirahState& s : daily) {
    const double shortfall = econ.Y0 - gdp(workforce(s, u, econ, p), econ);
    loss_million += std::max(shortfall, 0.0) / kDaysPerYear;
  }
  return loss_million * kMillion;
}

inline double aggregate(double health_step, double eco_step, double beta,
                        const CostScales& scales = CostScales::published()) {
  if (beta < 0 || beta > 1) throw std::invalid_argument("aggregate: beta must lie in [0, 1]");
  return (1.0 - beta) * health_step / scales.health + beta * eco_step / scales.eco;
}

inline ConstraintFlags check_constraints(double health_cum, double eco_cum,
                                         const ConstraintSpec& spec) noexcept {
  ConstraintFlags f;
  f.deaths = spec.max_deaths && health_cum > *spec.max_deaths;
  f.eco = spec.max_eco && eco_cum > *spec.max_eco;
  return f;
}

}  // namespace epiopt
