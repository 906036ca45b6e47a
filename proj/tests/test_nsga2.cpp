#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "epiopt/nsga2.hpp"
#include "epiopt/pareto.hpp"

using namespace epiopt;

namespace {

// O(n^2) oracle: repeatedly peel the points nobody remaining dominates.
std::vector<std::vector<std::size_t>> brute_force_fronts(const std::vector<Objectives>& pts) {
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<bool> done(pts.size(), false);
  std::size_t left = pts.size();
  while (left > 0) {
    std::vector<std::size_t> f;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (done[i]) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < pts.size() && !dominated; ++j)
        dominated = !done[j] && j != i && dominates(pts[j], pts[i]);
      if (!dominated) f.push_back(i);
    }
    for (std::size_t i : f) done[i] = true;
    left -= f.size();
    fronts.push_back(f);
  }
  return fronts;
}

std::vector<std::vector<std::size_t>> sorted_fronts(std::vector<std::vector<std::size_t>> fronts) {
  for (auto& f : fronts) std::sort(f.begin(), f.end());
  return fronts;
}

Nsga2Result evolve_surrogate(std::uint64_t seed, int generations) {
  Nsga2Config cfg;
  cfg.population_size = 40;
  cfg.generations = generations;
  cfg.mutation_rate = 0.5;
  cfg.mutation_scale = 0.1;
  cfg.seed = seed;
  auto init = [](Rng& rng) { return std::vector<double>{-2 + 5 * uniform01(rng), -2 + 5 * uniform01(rng)}; };
  auto eval = [](const std::vector<std::vector<double>>& gs, int) {
    std::vector<Fitness> f;
    for (const auto& g : gs) f.push_back({{g[0] * g[0], (g[0] - 1) * (g[0] - 1)}, {}});
    return f;
  };
  return evolve(init, eval, cfg);
}

}  // namespace

TEST(Dominance, Definition) {
  EXPECT_TRUE(dominates({1, 1}, {1, 2}));
  EXPECT_FALSE(dominates({1, 1}, {1, 1}));
  EXPECT_FALSE(dominates({1, 3}, {2, 2}));
}

TEST(NonDominatedSort, WorkedExample) {
  const std::vector<Objectives> pts{{1, 2}, {2, 1}, {2, 2}, {3, 3}};
  const auto f = sorted_fronts(fast_non_dominated_sort(pts));
  EXPECT_EQ(f, (std::vector<std::vector<std::size_t>>{{0, 1}, {2}, {3}}));
}

TEST(NonDominatedSort, IdenticalAndSingle) {
  const std::vector<Objectives> same(5, Objectives{2, 2});
  EXPECT_EQ(fast_non_dominated_sort(same).size(), 1u);
  EXPECT_EQ(fast_non_dominated_sort(same)[0].size(), 5u);
  const std::vector<Objectives> one{{4, 4}};
  EXPECT_EQ(fast_non_dominated_sort(one), (std::vector<std::vector<std::size_t>>{{0}}));
  EXPECT_TRUE(fast_non_dominated_sort(std::vector<Objectives>{}).empty());
}

TEST(NonDominatedSort, MatchesBruteForceOnRandomInstances) {
  Rng rng(2024);
  std::uniform_int_distribution<int> size(1, 50), grid(0, 9);
  for (int inst = 0; inst < 1000; ++inst) {
    std::vector<Objectives> pts(static_cast<std::size_t>(size(rng)));
    // Half the instances on a coarse grid to exercise ties.
    for (auto& p : pts) p = inst % 2 ? Objectives{double(grid(rng)), double(grid(rng))} : Objectives{uniform01(rng), uniform01(rng)};
    ASSERT_EQ(sorted_fronts(fast_non_dominated_sort(pts)), brute_force_fronts(pts)) << "instance " << inst;
  }
}

TEST(NonDominatedSort, RanksInvariantUnderObjectiveScaling) {
  Rng rng(5);
  for (int inst = 0; inst < 100; ++inst) {
    std::vector<Objectives> pts(30), scaled(30);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      pts[i] = {uniform01(rng), uniform01(rng)};
      scaled[i] = {pts[i][0] * 1e9, pts[i][1] * 0.003};
    }
    EXPECT_EQ(sorted_fronts(fast_non_dominated_sort(pts)), sorted_fronts(fast_non_dominated_sort(scaled)));
  }
}

TEST(Crowding, GoldenValues) {
  const auto inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(crowding_distance(std::vector<Objectives>{{0, 1}, {1, 0}}), (std::vector<double>{inf, inf}));
  const auto d = crowding_distance(std::vector<Objectives>{{0, 2}, {1, 1}, {2, 0}});
  EXPECT_EQ(d[0], inf);
  EXPECT_EQ(d[2], inf);
  EXPECT_DOUBLE_EQ(d[1], 2.0);
  EXPECT_EQ(crowding_distance(std::vector<Objectives>{{3, 3}}), (std::vector<double>{inf}));
}

TEST(Crowding, ConstantObjectiveContributesNothing) {
  const auto d = crowding_distance(std::vector<Objectives>{{0, 5}, {1, 5}, {3, 5}, {4, 5}});
  for (double x : d) EXPECT_FALSE(std::isnan(x));
  EXPECT_DOUBLE_EQ(d[1], 0.75);
  EXPECT_DOUBLE_EQ(d[2], 0.75);
}

TEST(Tournament, RankThenCrowding) {
  Rng rng(1);
  std::vector<Individual> pop(2);
  pop[0].rank = 2;
  pop[1].rank = 0;
  for (int i = 0; i < 50; ++i) EXPECT_EQ(tournament_select(pop, rng), 1u);
  pop[0].rank = pop[1].rank = 1;
  pop[0].crowding = std::numeric_limits<double>::infinity();
  pop[1].crowding = 1.3;
  for (int i = 0; i < 50; ++i) EXPECT_EQ(tournament_select(pop, rng), 0u);
}

TEST(Tournament, FullTieIsFair) {
  Rng rng(9);
  std::vector<Individual> pop(2);
  int first = 0;
  for (int i = 0; i < 10'000; ++i) first += tournament_select(pop, rng) == 0;
  EXPECT_NEAR(first / 10'000.0, 0.5, 0.02);
}

TEST(Variation, ZeroRatesAreIdentity) {
  Rng rng(3);
  const std::vector<double> a{1, 2, 3, 4}, b{5, 6, 7, 8};
  const auto [c, d] = crossover(a, b, 0.0, rng);
  EXPECT_EQ(c, a);
  EXPECT_EQ(d, b);
  EXPECT_EQ(mutate(a, 0.0, 1.0, rng), a);
  EXPECT_THROW(crossover(a, std::vector<double>{1}, 0.5, rng), std::invalid_argument);
}

TEST(Variation, CrossoverPreservesGenes) {
  Rng rng(4);
  const std::vector<double> a{1, 2, 3, 4, 5, 6}, b{-1, -2, -3, -4, -5, -6};
  const auto [c, d] = crossover(a, b, 0.5, rng);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(std::multiset<double>({c[i], d[i]}), std::multiset<double>({a[i], b[i]}));
}

TEST(Variation, MutationScale) {
  Rng rng(7);
  const std::vector<double> parent(10'000, 0.25);
  const auto child = mutate(parent, 1.0, 0.1, rng);
  double m = 0, ss = 0;
  for (std::size_t i = 0; i < child.size(); ++i) m += child[i] - parent[i];
  m /= child.size();
  for (std::size_t i = 0; i < child.size(); ++i) ss += (child[i] - parent[i] - m) * (child[i] - parent[i] - m);
  EXPECT_NEAR(std::sqrt(ss / (child.size() - 1)), 0.1, 0.005);
}

TEST(Config, BudgetToGenerations) {
  EXPECT_EQ(Nsga2Config::generations_for_budget(1'000'000, 40, 30, 52), 16);
  EXPECT_EQ(Nsga2Config::generations_for_budget(15'000'000, 40, 30, 52), 240);
  Nsga2Config c;
  c.population_size = 7;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Evolve, SurrogateFrontSpansKnownParetoSet) {
  const auto r = evolve_surrogate(11, 50);
  double lo = 1e9, hi = -1e9;
  std::vector<Objectives> pts;
  for (const auto& ind : r.front) {
    lo = std::min(lo, ind.genome[0]);
    hi = std::max(hi, ind.genome[0]);
    pts.push_back(ind.fitness);
  }
  EXPECT_LT(lo, 0.05);
  EXPECT_GT(hi, 0.95);
  for (const auto& ind : r.front) {
    EXPECT_GE(ind.genome[0], -0.05);
    EXPECT_LE(ind.genome[0], 1.05);
  }
  // Dense sampling of the true front as the reference hypervolume.
  std::vector<Objectives> truth;
  for (int i = 0; i <= 10'000; ++i) {
    const double x = i / 10'000.0;
    truth.push_back({x * x, (x - 1) * (x - 1)});
  }
  const Objectives ref{1.0, 1.0};
  EXPECT_GT(hypervolume_2d(pts, ref), 0.95 * hypervolume_2d(truth, ref));
}

TEST(Evolve, FinalFrontIsNonDominated) {
  const auto r = evolve_surrogate(3, 10);
  for (const auto& a : r.front)
    for (const auto& b : r.front) EXPECT_FALSE(dominates(a.fitness, b.fitness));
  for (const auto& ind : r.population) EXPECT_GE(ind.rank, 0);
}

TEST(Evolve, ElitismKeepsBestPerObjective) {
  const auto r = evolve_surrogate(5, 20);
  double best0 = 1e18, best1 = 1e18;
  for (const auto& g : r.history) {
    double b0 = 1e18, b1 = 1e18;
    for (const auto& ind : g.front) {
      b0 = std::min(b0, ind.fitness[0]);
      b1 = std::min(b1, ind.fitness[1]);
    }
    EXPECT_LE(b0, best0);
    EXPECT_LE(b1, best1);
    best0 = b0;
    best1 = b1;
  }
}

TEST(Evolve, FixedSeedIsReproducible) {
  const auto a = evolve_surrogate(8, 5), b = evolve_surrogate(8, 5);
  ASSERT_EQ(a.population.size(), b.population.size());
  for (std::size_t i = 0; i < a.population.size(); ++i) EXPECT_EQ(a.population[i].genome, b.population[i].genome);
}

TEST(EvolvePolicies, SmallRunOnEpidemic) {
  Nsga2Config cfg;
  cfg.population_size = 4;
  cfg.generations = 1;
  cfg.n_eval = 2;
  cfg.seed = 1;
  const auto r = evolve_policies(EnvConfig{}, cfg, 8);
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_FALSE(r.front.empty());
  for (const auto& ind : r.front) {
    EXPECT_GT(ind.fitness[0], 0.0);
    EXPECT_GT(ind.fitness[1], 0.0);
  }
  // Common random numbers: every member of a generation sees the same episode seeds.
  EXPECT_EQ(generation_seed(1, 3), generation_seed(1, 3));
  EXPECT_NE(generation_seed(1, 3), generation_seed(1, 4));
}
