#pragma once

// SEIRAH compartmental dynamics, the distribution over model instances and
// the lockdown staircase that maps consecutive lockdown weeks to a
// transmission rate.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "epiopt/rng.hpp"

namespace epiopt {

struct InitialCounts {
  double E0 = 5004.0;
  double I0 = 16.0;
  double R0 = 0.0;
  double A0 = 356.0;
  double H0 = 4.0;

  double total() const noexcept { return E0 + I0 + R0 + A0 + H0; }
};

/// Epidemiological parameters. Defaults are the Ile-de-France estimates.
struct SeirahParams {
  double b0 = 2.23;     ///< transmission rate before lockdown (per day)
  double r = 0.043;     ///< ascertainment fraction
  double alpha = 0.55;  ///< transmissibility of A relative to I
  double De = 5.1;      ///< latent period (days)
  double Di = 2.3;      ///< infectious period (days)
  double Dq = 0.36;     ///< onset to hospitalization (days)
  double Dh = 30.0;     ///< hospitalization period (days)
  double N = 12'278'210.0;
  /// Log-scale modifiers of b after 1, 2, 3 and 4+ consecutive lockdown weeks.
  std::array<double, 4> lockdown_effects{-0.11, -0.50, -1.36, -1.46};
  double death_rate = 0.005;  ///< fraction of R counted as dead
  InitialCounts init{};

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("SeirahParams: ") + what);
    };
    require(De > 0 && Di > 0 && Dq > 0 && Dh > 0, "durations must be > 0");
    require(r >= 0 && r <= 1, "r must lie in [0, 1]");
    require(N > 0, "N must be > 0");
    require(b0 >= 0 && alpha >= 0, "b0 and alpha must be >= 0");
    require(death_rate >= 0 && death_rate <= 1, "death_rate must lie in [0, 1]");
    for (std::size_t i = 1; i < lockdown_effects.size(); ++i)
      require(lockdown_effects[i] <= lockdown_effects[i - 1],
              "lockdown_effects must be non-increasing");
    require(init.total() <= N, "initial counts exceed N");
  }
};

struct SeirahState {
  double S = 0, E = 0, I = 0, R = 0, A = 0, H = 0;
  double t = 0;  ///< elapsed simulation time (days)

  double total() const noexcept { return S + E + I + R + A + H; }
  bool operator==(const SeirahState&) const = default;
};

/// Time derivatives of the six compartments, per day.
struct SeirahRates {
  double dS = 0, dE = 0, dI = 0, dR = 0, dA = 0, dH = 0;

  double sum() const noexcept { return dS + dE + dI + dR + dA + dH; }
};

class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Transmission staircase

inline constexpr int kMaxLevel = 4;

/// Position on the lockdown staircase: 0 is no effect, 4 the deepest.
class TransmissionLevel {
 public:
  constexpr TransmissionLevel() = default;
  constexpr explicit TransmissionLevel(int level) : level_(level) {
    if (level < 0 || level > kMaxLevel) throw std::out_of_range("TransmissionLevel out of range");
  }
  constexpr int value() const noexcept { return level_; }
  constexpr bool operator==(const TransmissionLevel&) const = default;

 private:
  int level_ = 0;
};

constexpr TransmissionLevel update_level(TransmissionLevel level, bool lockdown) {
  const int v = level.value();
  return TransmissionLevel(lockdown ? std::min(v + 1, kMaxLevel) : std::max(v - 1, 0));
}

inline double transmission_rate(const SeirahParams& p, TransmissionLevel level) {
  const int v = level.value();
  if (v == 0) return p.b0;
  return p.b0 * std::exp(p.lockdown_effects[static_cast<std::size_t>(v - 1)]);
}

// ---------------------------------------------------------------------------
// Dynamics

inline SeirahRates derivative(const SeirahState& s, const SeirahParams& p, double b) noexcept {
  const double infection = b * s.S * (s.I + p.alpha * s.A) / p.N;
  const double incubated = s.E / p.De;
  SeirahRates d;
  d.dS = -infection;
  d.dE = infection - incubated;
  d.dI = p.r * incubated - s.I / p.Dq - s.I / p.Di;
  d.dA = (1.0 - p.r) * incubated - s.A / p.Di;
  d.dH = s.I / p.Dq - s.H / p.Dh;
  d.dR = (s.I + s.A) / p.Di + s.H / p.Dh;
  return d;
}

namespace detail {

inline SeirahState advance(const SeirahState& s, const SeirahRates& d, double h) noexcept {
  SeirahState out = s;
  out.S += h * d.dS;
  out.E += h * d.dE;
  out.I += h * d.dI;
  out.R += h * d.dR;
  out.A += h * d.dA;
  out.H += h * d.dH;
  return out;
}

inline SeirahState rk4_step(const SeirahState& s, const SeirahParams& p, double b, double h) noexcept {
  const SeirahRates k1 = derivative(s, p, b);
  const SeirahRates k2 = derivative(advance(s, k1, h / 2), p, b);
  const SeirahRates k3 = derivative(advance(s, k2, h / 2), p, b);
  const SeirahRates k4 = derivative(advance(s, k3, h), p, b);
  SeirahRates k;
  k.dS = (k1.dS + 2 * k2.dS + 2 * k3.dS + k4.dS) / 6;
  k.dE = (k1.dE + 2 * k2.dE + 2 * k3.dE + k4.dE) / 6;
  k.dI = (k1.dI + 2 * k2.dI + 2 * k3.dI + k4.dI) / 6;
  k.dR = (k1.dR + 2 * k2.dR + 2 * k3.dR + k4.dR) / 6;
  k.dA = (k1.dA + 2 * k2.dA + 2 * k3.dA + k4.dA) / 6;
  k.dH = (k1.dH + 2 * k2.dH + 2 * k3.dH + k4.dH) / 6;
  SeirahState out = advance(s, k, h);
  out.t = s.t + h;
  return out;
}

// Clamps round-off negatives; anything below -1e-9 N means the step is too coarse.
inline void enforce_nonnegative(SeirahState& s, double N) {
  const double floor = -1e-9 * N;
  for (double* c : {&s.S, &s.E, &s.I, &s.R, &s.A, &s.H}) {
    if (*c < floor) throw IntegrationError("compartment below -1e-9 N; reduce the step size");
    if (*c < 0) *c = 0;
  }
}

}  // namespace detail

inline constexpr double kDefaultStep = 0.25;

/// Advances `state` by `horizon` days with classical fixed-step RK4 at
/// constant transmission rate `b`. A horizon that is not a multiple of `dt`
/// ends with one shorter step.
inline SeirahState integrate(SeirahState state, const SeirahParams& p, double b, double horizon,
                             double dt = kDefaultStep) {
  if (horizon < 0) throw std::invalid_argument("integrate: negative horizon");
  if (dt <= 0) throw std::invalid_argument("integrate: dt must be > 0");
  const auto full_steps = static_cast<long>(std::floor(horizon / dt + 1e-9));
  for (long i = 0; i < full_steps; ++i) {
    state = detail::rk4_step(state, p, b, dt);
    detail::enforce_nonnegative(state, p.N);
  }
  const double rest = horizon - static_cast<double>(full_steps) * dt;
  if (rest > 1e-12) {
    state = detail::rk4_step(state, p, b, rest);
    detail::enforce_nonnegative(state, p.N);
  }
  return state;
}

/// Table initial state, free-run (no lockdown) for `onset_delay` days.
inline SeirahState initial_state(const SeirahParams& p, double onset_delay, double dt = kDefaultStep) {
  SeirahState s;
  s.E = p.init.E0;
  s.I = p.init.I0;
  s.R = p.init.R0;
  s.A = p.init.A0;
  s.H = p.init.H0;
  s.S = p.N - p.init.total();
  s.t = 0;
  if (onset_delay > 0) s = integrate(s, p, p.b0, onset_delay, dt);
  return s;
}

/// Daily snapshots (days + 1 entries, day 0 first) without any lockdown.
inline std::vector<SeirahState> run_free(const SeirahParams& p, const SeirahState& start, int days,
                                         double dt = kDefaultStep) {
  if (days < 1) throw std::invalid_argument("run_free: days must be >= 1");
  std::vector<SeirahState> out;
  out.reserve(static_cast<std::size_t>(days) + 1);
  out.push_back(start);
  for (int d = 0; d < days; ++d) out.push_back(integrate(out.back(), p, p.b0, 1.0, dt));
  return out;
}

inline std::vector<SeirahState> run_free(const SeirahParams& p, int days, double dt = kDefaultStep) {
  return run_free(p, initial_state(p, 0.0, dt), days, dt);
}

inline double death_toll(const SeirahParams& p, const SeirahState& s) noexcept {
  return p.death_rate * s.R;
}

// ---------------------------------------------------------------------------
// Model distribution

/// Per-parameter standard deviations, in the parameter's own unit.
struct SeirahStdevs {
  double b0 = 0, r = 0, alpha = 0, De = 0, Di = 0, Dq = 0, Dh = 0, N = 0;
  std::array<double, 4> lockdown_effects{0, 0, 0, 0};
};

struct ModelDistribution {
  SeirahParams means{};
  SeirahStdevs stdevs{};
  double onset_delay_min = 0.0;
  double onset_delay_max = 21.0;

  /// Independent normals with stdev = `fraction` of |mean|. Population size
  /// is a census count and stays fixed.
  static ModelDistribution relative(const SeirahParams& means, double fraction = 0.10) {
    ModelDistribution d;
    d.means = means;
    d.stdevs.b0 = fraction * std::abs(means.b0);
    d.stdevs.r = fraction * std::abs(means.r);
    d.stdevs.alpha = fraction * std::abs(means.alpha);
    d.stdevs.De = fraction * means.De;
    d.stdevs.Di = fraction * means.Di;
    d.stdevs.Dq = fraction * means.Dq;
    d.stdevs.Dh = fraction * means.Dh;
    d.stdevs.N = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      d.stdevs.lockdown_effects[i] = fraction * std::abs(means.lockdown_effects[i]);
    return d;
  }

  /// Every sample equals the means; onset delay is zero.
  static ModelDistribution degenerate(const SeirahParams& means) {
    ModelDistribution d;
    d.means = means;
    d.onset_delay_min = d.onset_delay_max = 0.0;
    return d;
  }

  void validate() const {
    means.validate();
    const SeirahStdevs& s = stdevs;
    for (double v : {s.b0, s.r, s.alpha, s.De, s.Di, s.Dq, s.Dh, s.N})
      if (v < 0) throw std::invalid_argument("ModelDistribution: negative stdev");
    for (double v : s.lockdown_effects)
      if (v < 0) throw std::invalid_argument("ModelDistribution: negative stdev");
    if (onset_delay_min < 0 || onset_delay_max < onset_delay_min)
      throw std::invalid_argument("ModelDistribution: bad onset delay range");
  }
};

struct SampledModel {
  SeirahParams params;
  double onset_delay = 0.0;
};

/// Draws one model instance. Draw order is fixed so a seed pins the sample.
inline SampledModel sample_model(const ModelDistribution& dist, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  auto draw = [&](double mean, double sd) {
    const double z = unit(rng);  // always consumed, keeps streams aligned
    return sd > 0 ? mean + sd * z : mean;
  };
  auto positive = [](double v, double mean) { return std::max(v, 0.01 * mean); };

  const SeirahParams& m = dist.means;
  const SeirahStdevs& s = dist.stdevs;
  SampledModel out;
  SeirahParams& p = out.params;
  p = m;
  p.b0 = std::max(draw(m.b0, s.b0), 0.0);
  p.r = std::clamp(draw(m.r, s.r), 0.0, 1.0);
  p.alpha = std::max(draw(m.alpha, s.alpha), 0.0);
  p.De = positive(draw(m.De, s.De), m.De);
  p.Di = positive(draw(m.Di, s.Di), m.Di);
  p.Dq = positive(draw(m.Dq, s.Dq), m.Dq);
  p.Dh = positive(draw(m.Dh, s.Dh), m.Dh);
  p.N = std::max(draw(m.N, s.N), m.init.total() + 1.0);
  double running = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double e = std::min(draw(m.lockdown_effects[i], s.lockdown_effects[i]), 0.0);
    running = std::min(running, e);
    p.lockdown_effects[i] = running;
  }

  if (dist.onset_delay_max > dist.onset_delay_min) {
    out.onset_delay =
        std::uniform_real_distribution<double>(dist.onset_delay_min, dist.onset_delay_max)(rng);
  } else {
    (void)uniform01(rng);
    out.onset_delay = dist.onset_delay_min;
  }
  return out;
}

}  // namespace epiopt
