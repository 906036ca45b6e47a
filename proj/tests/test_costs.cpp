#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "epiopt/costs.hpp"

using namespace epiopt;

namespace {

// Disease-free population: nobody ill, isolated or dead.
SeirahState healthy(const SeirahParams& p) {
  SeirahState s;
  s.S = p.N;
  return s;
}

}  // namespace

TEST(HealthCost, DeathIncrement) {
  SeirahParams p;
  SeirahState a, b;
  b.R = 1000;
  EXPECT_DOUBLE_EQ(health_cost_step(a, b, p), 5.0);
  EXPECT_EQ(health_cost_step(b, b, p), 0.0);
  EXPECT_THROW(health_cost_step(b, a, p), std::logic_error);
}

TEST(HealthCost, TelescopesOverAnEpisode) {
  SeirahParams p;
  auto s = initial_state(p, 0.0);
  const double r0 = s.R;
  double sum = 0;
  for (int w = 0; w < 52; ++w) {
    const auto next = integrate(s, p, transmission_rate(p, TransmissionLevel(w % 3)), 7.0);
    sum += health_cost_step(s, next, p);
    s = next;
  }
  EXPECT_NEAR(sum, p.death_rate * (s.R - r0), 1e-9 * sum);
}

TEST(Workforce, Values) {
  SeirahParams p;
  EconParams e;
  EXPECT_NEAR(workforce(healthy(p), 0.0, e, p), 4.592, 1e-3);
  EXPECT_NEAR(workforce(healthy(p), 0.0, e, p), e.L0, 0.02);
  EXPECT_EQ(workforce(healthy(p), 1.0, e, p), 0.0);
  EXPECT_NEAR(workforce(healthy(p), 0.5, e, p), 2.296, 1e-3);
  EXPECT_THROW(workforce(healthy(p), 1.5, e, p), std::invalid_argument);
}

TEST(Workforce, SickAndDeadDoNotWork) {
  SeirahParams p;
  EconParams e;
  SeirahState s = healthy(p);
  s.S -= 3000;
  s.I = 1000;
  s.H = 1000;
  s.R = 1000;
  const double G = 1000 + 1000 + 5;
  EXPECT_NEAR(workforce(s, 0.0, e, p), e.lambda_rate * (p.N - G) / 1e6, 1e-12);
}

TEST(Gdp, CalibratedAgainstTableOutput) {
  EconParams e;
  EXPECT_LT(std::abs(gdp(4.58, e) - e.Y0) / e.Y0, 0.005);
  EXPECT_EQ(gdp(0.0, e), 0.0);
}

TEST(Gdp, IncreasingAndConcave) {
  EconParams e;
  for (double L = 0.5; L < 6.0; L += 0.5) {
    const double h = 0.1;
    EXPECT_GT(gdp(L + h, e), gdp(L, e));
    EXPECT_LT(gdp(L + h, e) - gdp(L, e), gdp(L, e) - gdp(L - h, e));
  }
}

TEST(EconomicCost, NoLockdownHealthyWeekIsFree) {
  SeirahParams p;
  EconParams e;
  const std::array<SeirahState, 7> week{healthy(p), healthy(p), healthy(p), healthy(p),
                                        healthy(p), healthy(p), healthy(p)};
  EXPECT_NEAR(economic_cost_step(week, false, e, p), 0.0, 0.005 * e.Y0 * 1e6 * 7 / 365);
  EXPECT_GE(economic_cost_step(week, false, e, p), 0.0);
}

TEST(EconomicCost, LockdownWeek) {
  SeirahParams p;
  EconParams e;
  const std::array<SeirahState, 7> week{healthy(p), healthy(p), healthy(p), healthy(p),
                                        healthy(p), healthy(p), healthy(p)};
  const double closed_form = e.Y0 * (1 - std::pow(0.5, 0.63)) * 1e6 * 7 / 365;  // ~2.88e9
  EXPECT_NEAR(closed_form, 2.88e9, 0.01e9);
  EXPECT_NEAR(economic_cost_step(week, true, e, p), closed_form, 0.01 * closed_form);
  EXPECT_GT(economic_cost_step(week, true, e, p), economic_cost_step(week, false, e, p));
}

TEST(EconomicCost, NonDecreasingInIllness) {
  SeirahParams p;
  EconParams e;
  double prev = -1;
  for (double ill = 0; ill <= 1e6; ill += 1e5) {
    SeirahState s = healthy(p);
    s.S -= ill;
    s.I = ill;
    const std::array<SeirahState, 1> day{s};
    const double c = economic_cost_step(day, false, e, p);
    EXPECT_GE(c, prev);
    prev = c;
  }
}

TEST(Aggregate, PublishedScales) {
  EXPECT_NEAR(aggregate(650, 1e9, 0.0), 0.01, 1e-15);
  EXPECT_NEAR(aggregate(650, 1e9, 1.0), 1.0, 1e-15);
  EXPECT_NEAR(aggregate(650, 1e9, 0.5), 0.505, 1e-15);
  EXPECT_THROW(aggregate(1, 1, 1.5), std::invalid_argument);
}

TEST(Aggregate, AffineInBeta) {
  const CostScales s = CostScales::balanced();
  const double h = 1234, e = 5e9;
  for (double beta = 0; beta <= 1.0; beta += 0.125) {
    const double expected = (1 - beta) * aggregate(h, e, 0.0, s) + beta * aggregate(h, e, 1.0, s);
    EXPECT_NEAR(aggregate(h, e, beta, s), expected, 1e-12);
  }
  EXPECT_EQ(aggregate(h, 0, 0.0, s), aggregate(h, 9e9, 0.0, s));
  EXPECT_EQ(aggregate(0, e, 1.0, s), aggregate(7e3, e, 1.0, s));
}

TEST(Constraints, Flags) {
  const ConstraintSpec both{1000.0, 20e9};
  EXPECT_EQ(check_constraints(500, 10e9, both), (ConstraintFlags{false, false}));
  const ConstraintSpec deaths_only{1000.0, std::nullopt};
  EXPECT_EQ(check_constraints(1001, 10e9, deaths_only), (ConstraintFlags{true, false}));
  EXPECT_EQ(check_constraints(1000, 10e9, deaths_only), (ConstraintFlags{false, false}));
  EXPECT_EQ(check_constraints(1e9, 1e15, ConstraintSpec{}), (ConstraintFlags{false, false}));
}

TEST(Constraints, BoundAtRangeMaxIsInactive) {
  const auto e = effective_constraints(ConstraintSpec{kMaxDeathsBound, kMaxEcoBound});
  EXPECT_FALSE(e.max_deaths);
  EXPECT_FALSE(e.max_eco);
  const auto k = effective_constraints(ConstraintSpec{30'500.0, 160e9 - 1});
  EXPECT_EQ(k.max_deaths, 30'500.0);
  EXPECT_EQ(k.max_eco, 160e9 - 1);
  EXPECT_FALSE(effective_constraints(ConstraintSpec{}).max_deaths);
}
