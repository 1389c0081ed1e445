#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "hcqos/errors.hpp"
#include "hcqos/kernels.hpp"
#include "oracles.hpp"

using namespace hcqos;

namespace {

std::size_t binom(int n, int k) {
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST(Grid, SimplexCountIsStarsAndBars) {
  // points with sum(k) <= g-1 over m components: C(g-1+m, m)
  for (int m = 1; m <= 4; ++m)
    for (int g : {2, 5, 11}) {
      const auto grid = kernels::enumerate_grid(ControlBounds::simplex(m), g);
      EXPECT_EQ(grid.size(), binom(g - 1 + m, m)) << m << " " << g;
    }
}

TEST(Grid, LexicographicAndFeasible) {
  ControlBounds U{(Vector(3) << 0.1, 0.0, 0.0).finished(), (Vector(3) << 0.6, 1.0, 0.4).finished()};
  const auto g = kernels::enumerate_grid(U, 11);
  ASSERT_GT(g.size(), 0u);
  for (std::size_t p = 0; p < g.size(); ++p) {
    EXPECT_TRUE(U.contains(g.point(p)));
    if (p == 0) continue;
    const int* a = &g.levels[(p - 1) * 3];
    const int* b = &g.levels[p * 3];
    EXPECT_TRUE(std::lexicographical_compare(a, a + 3, b, b + 3));
  }
  EXPECT_DOUBLE_EQ(g.point(0)[0], 0.1);
}

TEST(Grid, EmptyIsConfigError) {
  ControlBounds U{(Vector(2) << 0.55, 0.55).finished(), Vector::Ones(2)};
  EXPECT_THROW(kernels::enumerate_grid(U, 11), ConfigError);
  EXPECT_THROW(kernels::enumerate_grid(ControlBounds::simplex(2), 1), ConfigError);
}

TEST(Condense, MatchesStepByStepCost) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4, m = 1 + (trial / 4) % 3, H = 1 + trial % 3;
    auto model = StateSpaceModel::make(oracle::random_matrix(rng, n, n),
                                       oracle::random_matrix(rng, n, m));
    auto w = CostWeights::make(oracle::random_spd(rng, n, 0.0), oracle::random_spd(rng, m, 0.2),
                               oracle::random_vector(rng, n));
    const Vector x = oracle::random_vector(rng, n, -1, 1);
    const auto h = kernels::condense(model, w, x, H);
    const auto grid = kernels::enumerate_grid(model.U, 5);
    for (std::size_t p = 0; p < grid.size(); ++p) {
      const double ref = oracle::hold_cost(model, w, x, grid.point(p), H);
      EXPECT_NEAR(kernels::candidate_cost(h, grid, p), ref, 1e-10 * std::max(1.0, ref));
    }
  }
}

TEST(Search, ParallelEqualsSerial) {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 1 + trial % 5;
    const int n = 2 * m;
    auto model = StateSpaceModel::make(oracle::random_matrix(rng, n, n),
                                       oracle::random_matrix(rng, n, m));
    auto w = CostWeights::make(oracle::random_spd(rng, n, 0.0), oracle::random_spd(rng, m, 0.1),
                               oracle::random_vector(rng, n));
    const auto h = kernels::condense(model, w, oracle::random_vector(rng, n), 3);
    const auto grid = kernels::enumerate_grid(model.U, m <= 3 ? 21 : 11);
    const auto s = kernels::search_serial(h, grid);
    const auto p = kernels::search_parallel(h, grid);
    EXPECT_EQ(s.index, p.index);
    EXPECT_EQ(s.cost, p.cost);
  }
}

TEST(Search, TiesGoToFirstIndex) {
  // zero cost everywhere
  kernels::HorizonCost h;
  h.m = 2;
  h.M.assign(4, 0.0);
  h.g.assign(2, 0.0);
  const auto grid = kernels::enumerate_grid(ControlBounds::simplex(2), 11);
  EXPECT_EQ(kernels::search_serial(h, grid).index, 0u);
  EXPECT_EQ(kernels::search_parallel(h, grid).index, 0u);
}
