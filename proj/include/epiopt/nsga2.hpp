#pragma once

// NSGA-II over flat real-valued genomes with two minimised objectives.
// The generic loop is decoupled from the epidemic; evolve_policies() wires it
// to lockdown policies (argmax of a 2-output MLP) evaluated on noisy episodes.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "epiopt/env.hpp"
#include "epiopt/policy.hpp"
#include "epiopt/rng.hpp"

namespace epiopt {

using Objectives = std::array<double, 2>;

/// a dominates b: no worse on both objectives and strictly better on one.
constexpr bool dominates(const Objectives& a, const Objectives& b) noexcept {
  return a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1]);
}

/// Fronts of point indices; front 0 is the non-dominated set.
inline std::vector<std::vector<std::size_t>> fast_non_dominated_sort(std::span<const Objectives> pts) {
  const std::size_t n = pts.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> dom_count(n, 0);
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates(pts[p], pts[q]))
        dominated[p].push_back(q);
      else if (dominates(pts[q], pts[p]))
        ++dom_count[p];
    }
    if (dom_count[p] == 0) current.push_back(p);
  }
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t p : current)
      for (std::size_t q : dominated[p])
        if (--dom_count[q] == 0) next.push_back(q);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

/// Crowding distance of each point of one front. Extremes on any objective
/// are infinite; a constant objective contributes nothing.
inline std::vector<double> crowding_distance(std::span<const Objectives> front) {
  const std::size_t n = front.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> d(n, 0.0);
  if (n <= 2) {
    std::fill(d.begin(), d.end(), inf);
    return d;
  }
  std::vector<std::size_t> order(n);
  for (std::size_t m = 0; m < 2; ++m) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return front[a][m] < front[b][m]; });
    const double lo = front[order.front()][m];
    const double hi = front[order.back()][m];
    d[order.front()] = inf;
    d[order.back()] = inf;
    if (hi <= lo) continue;
    for (std::size_t k = 1; k + 1 < n; ++k)
      d[order[k]] += (front[order[k + 1]][m] - front[order[k - 1]][m]) / (hi - lo);
  }
  return d;
}

struct Individual {
  std::vector<double> genome;
  Objectives fitness{};
  Objectives fitness_stderr{};
  int rank = 0;
  double crowding = 0.0;
};

struct Fitness {
  Objectives mean{};
  Objectives stderr_{};
};

struct Nsga2Config {
  int population_size = 40;
  int generations = 12;
  double crossover_rate = 0.5;
  double mutation_rate = 0.01;
  double mutation_scale = 0.1;
  int tournament_size = 2;
  int n_eval = 30;
  std::uint64_t seed = 0;

  /// Offspring generations affordable with an environment-step budget.
  static int generations_for_budget(long budget, int population_size, int n_eval, int horizon_weeks) {
    const long per_gen = static_cast<long>(population_size) * n_eval * horizon_weeks;
    return static_cast<int>(budget / per_gen);
  }

  void validate() const {
    if (population_size < 2 || population_size % 2 != 0)
      throw std::invalid_argument("population_size must be even and >= 2");
    if (generations < 0) throw std::invalid_argument("generations must be >= 0");
    if (tournament_size < 2) throw std::invalid_argument("tournament_size must be >= 2");
    if (n_eval < 1) throw std::invalid_argument("n_eval must be >= 1");
  }
};

/// Better of two candidates: lower rank, then larger crowding.
/// Returns 0 or 1, or -1 on a full tie.
inline int compare_candidates(const Individual& a, const Individual& b) {
  if (a.rank != b.rank) return a.rank < b.rank ? 0 : 1;
  if (a.crowding != b.crowding) return a.crowding > b.crowding ? 0 : 1;
  return -1;
}

/// k-way tournament over distinct members (k from the config, binary by default).
inline std::size_t tournament_select(const std::vector<Individual>& pop, Rng& rng, int tournament_size = 2) {
  if (pop.empty()) throw std::invalid_argument("tournament_select: empty population");
  if (pop.size() == 1) return 0;
  std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
  std::size_t best = pick(rng);
  const int k = std::min<int>(tournament_size, static_cast<int>(pop.size()));
  std::vector<std::size_t> seen{best};
  for (int i = 1; i < k; ++i) {
    std::size_t c;
    do c = pick(rng);
    while (std::find(seen.begin(), seen.end(), c) != seen.end());
    seen.push_back(c);
    const int cmp = compare_candidates(pop[best], pop[c]);
    if (cmp == 1 || (cmp == -1 && uniform01(rng) < 0.5)) best = c;
  }
  return best;
}

/// Uniform crossover: each gene is swapped between the children with
/// probability `rate`.
inline std::pair<std::vector<double>, std::vector<double>> crossover(const std::vector<double>& a,
                                                                     const std::vector<double>& b, double rate,
                                                                     Rng& rng) {
  if (a.size() != b.size()) throw std::invalid_argument("crossover: genome length mismatch");
  std::pair<std::vector<double>, std::vector<double>> kids{a, b};
  for (std::size_t i = 0; i < a.size(); ++i)
    if (uniform01(rng) < rate) std::swap(kids.first[i], kids.second[i]);
  return kids;
}

/// Adds N(0, scale) to each gene with probability `rate`.
inline std::vector<double> mutate(std::vector<double> genome, double rate, double scale, Rng& rng) {
  std::normal_distribution<double> noise(0.0, scale);
  for (double& g : genome)
    if (uniform01(rng) < rate) g += noise(rng);
  return genome;
}

/// Assigns rank and crowding in place; returns the fronts.
inline std::vector<std::vector<std::size_t>> rank_population(std::vector<Individual>& pop) {
  std::vector<Objectives> pts;
  pts.reserve(pop.size());
  for (const auto& ind : pop) pts.push_back(ind.fitness);
  auto fronts = fast_non_dominated_sort(pts);
  for (std::size_t f = 0; f < fronts.size(); ++f) {
    std::vector<Objectives> fp;
    for (std::size_t i : fronts[f]) fp.push_back(pts[i]);
    const auto cd = crowding_distance(fp);
    for (std::size_t k = 0; k < fronts[f].size(); ++k) {
      pop[fronts[f][k]].rank = static_cast<int>(f);
      pop[fronts[f][k]].crowding = cd[k];
    }
  }
  return fronts;
}

struct GenerationLog {
  int generation = 0;
  std::vector<Individual> front;  ///< rank-0 members of the parent population
};

struct Nsga2Result {
  std::vector<Individual> population;
  std::vector<Individual> front;
  std::vector<GenerationLog> history;
};

inline std::vector<Individual> first_front(const std::vector<Individual>& pop) {
  std::vector<Individual> f;
  for (const auto& ind : pop)
    if (ind.rank == 0) f.push_back(ind);
  return f;
}

/// Classic generational NSGA-II.
///  init(rng) -> genome
///  evaluate(genomes, generation) -> one Fitness per genome
template <class Init, class Evaluate>
Nsga2Result evolve(Init&& init, Evaluate&& evaluate, const Nsga2Config& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto P = static_cast<std::size_t>(cfg.population_size);

  auto evaluate_into = [&](std::vector<Individual>& inds, int generation) {
    std::vector<std::vector<double>> genomes;
    genomes.reserve(inds.size());
    for (const auto& ind : inds) genomes.push_back(ind.genome);
    const std::vector<Fitness> fit = evaluate(genomes, generation);
    if (fit.size() != inds.size()) throw std::logic_error("evolve: evaluator returned wrong count");
    for (std::size_t i = 0; i < inds.size(); ++i) {
      inds[i].fitness = fit[i].mean;
      inds[i].fitness_stderr = fit[i].stderr_;
    }
  };

  Nsga2Result out;
  std::vector<Individual> parents(P);
  for (auto& ind : parents) ind.genome = init(rng);
  evaluate_into(parents, 0);
  rank_population(parents);
  out.history.push_back({0, first_front(parents)});

  for (int gen = 1; gen <= cfg.generations; ++gen) {
    std::vector<Individual> offspring;
    offspring.reserve(P);
    while (offspring.size() < P) {
      const auto& a = parents[tournament_select(parents, rng, cfg.tournament_size)];
      const auto& b = parents[tournament_select(parents, rng, cfg.tournament_size)];
      auto [ga, gb] = crossover(a.genome, b.genome, cfg.crossover_rate, rng);
      offspring.push_back({mutate(std::move(ga), cfg.mutation_rate, cfg.mutation_scale, rng)});
      offspring.push_back({mutate(std::move(gb), cfg.mutation_rate, cfg.mutation_scale, rng)});
    }
    evaluate_into(offspring, gen);

    std::vector<Individual> merged = std::move(parents);
    merged.insert(merged.end(), std::make_move_iterator(offspring.begin()),
                  std::make_move_iterator(offspring.end()));
    const auto fronts = rank_population(merged);

    std::vector<Individual> next;
    next.reserve(P);
    for (const auto& front : fronts) {
      if (next.size() + front.size() <= P) {
        for (std::size_t i : front) next.push_back(merged[i]);
        continue;
      }
      std::vector<std::size_t> split = front;
      std::stable_sort(split.begin(), split.end(),
                       [&](std::size_t x, std::size_t y) { return merged[x].crowding > merged[y].crowding; });
      for (std::size_t k = 0; next.size() < P; ++k) next.push_back(merged[split[k]]);
      break;
    }
    parents = std::move(next);
    out.history.push_back({gen, first_front(parents)});
  }
  out.front = first_front(parents);
  out.population = std::move(parents);
  return out;
}

// ---------------------------------------------------------------------------
// Lockdown policies

/// Deterministic policy: argmax over the two outputs of the genome's MLP.
inline Action genome_action(const Mlp& net, const Observation& o) { return act_greedy(net.forward(o)); }

/// Per-generation evaluation seed; all individuals of a generation see the same episodes.
inline std::uint64_t generation_seed(std::uint64_t seed, int generation) {
  return derive_seed(seed ^ stream::kEval, static_cast<std::uint64_t>(generation));
}

inline Nsga2Result evolve_policies(EnvConfig env_cfg, const Nsga2Config& cfg, int hidden_dim = 64) {
  env_cfg.obs_mode = ObservationMode::kBase;
  env_cfg.goal = Goal{};
  const MlpSpec spec{static_cast<int>(obs::kBaseDim), hidden_dim, kNumActions};
  auto init = [&](Rng& rng) { return Mlp::initialized(spec, rng).flat(); };
  auto evaluate = [&](const std::vector<std::vector<double>>& genomes, int generation) {
    std::vector<Fitness> fit;
    fit.reserve(genomes.size());
    const std::uint64_t seed = generation_seed(cfg.seed, generation);
    for (const auto& g : genomes) {
      const Mlp net(spec, g);
      const EvalSummary s =
          evaluate_policy([&](const Observation& o) { return genome_action(net, o); }, env_cfg, cfg.n_eval, seed);
      fit.push_back({{s.health_mean, s.eco_mean}, {s.health_stderr, s.eco_stderr}});
    }
    return fit;
  };
  return evolve(init, evaluate, cfg);
}

}  // namespace epiopt
