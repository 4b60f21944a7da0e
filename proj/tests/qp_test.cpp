#include <gtest/gtest.h>

#include <random>

#include "qp_oracle.hpp"
#include "scalepoison/qp.hpp"

namespace sp = scalepoison;

namespace {

double max_band_violation(const sp::Matrix& W, const std::vector<double>& x, const std::vector<double>& t, double eps) {
  double worst = 0.0;
  for (int i = 0; i < W.rows; ++i) {
    double v = 0.0;
    for (int j = 0; j < W.cols; ++j) v += W(i, j) * x[static_cast<std::size_t>(j)];
    worst = std::max(worst, std::abs(v - t[static_cast<std::size_t>(i)]) - eps);
  }
  return worst;
}

}  // namespace

TEST(SolveQp, AlreadyFeasibleCostsNothing) {
  sp::Matrix W(2, 4);
  W(0, 0) = 0.25; W(0, 1) = 0.75; W(1, 2) = 0.5; W(1, 3) = 0.5;
  const std::vector<double> s = {10, 20, 30, 40};
  const std::vector<double> t = {0.25 * 10 + 0.75 * 20, 35};
  const auto sol = sp::solve_1d_qp(W, s, t, 0.0);
  EXPECT_TRUE(sol.feasible);
  EXPECT_EQ(sol.objective, 0.0);
  EXPECT_EQ(sol.x, s);
}

TEST(SolveQp, SymmetricPairMustSaturate) {
  sp::Matrix W(1, 2);
  W(0, 0) = 0.5; W(0, 1) = 0.5;
  const std::vector<double> s = {0, 0}, t = {255};
  const auto sol = sp::solve_1d_qp(W, s, t, 0.0);
  ASSERT_TRUE(sol.feasible);
  EXPECT_NEAR(sol.x[0], 255.0, 1e-9);
  EXPECT_NEAR(sol.x[1], 255.0, 1e-9);
  EXPECT_NEAR(sol.objective, 2.0 * 255.0 * 255.0, 1e-6);
}

TEST(SolveQp, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const auto q = sp::testing::random_feasible_qp(rng, 6, 3);
    const auto sol = sp::solve_1d_qp(q.W, q.s, q.t, q.eps);
    const auto oracle = sp::testing::brute_force_band_qp(q.W, q.s, q.t, q.eps);
    ASSERT_TRUE(oracle.feasible) << trial;
    ASSERT_TRUE(sol.feasible) << trial;
    EXPECT_LE(sol.objective, oracle.objective + 1e-6 * std::max(1.0, oracle.objective)) << trial;
    EXPECT_GE(sol.objective, oracle.objective - 1e-6 * std::max(1.0, oracle.objective)) << trial;
    EXPECT_LE(max_band_violation(q.W, sol.x, q.t, q.eps), 1e-9) << trial;
    for (double v : sol.x) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 255.0);
    }
  }
}

TEST(SolveQp, InfeasibleFallsBackToResidualMinimizer) {
  // Both rows see the same average but demand 0 and 255.
  sp::Matrix W(2, 2);
  W(0, 0) = W(0, 1) = W(1, 0) = W(1, 1) = 0.5;
  const std::vector<double> s = {0, 0}, t = {0, 255};
  const auto sol = sp::solve_1d_qp(W, s, t, 0.0);
  EXPECT_FALSE(sol.feasible);
  EXPECT_TRUE(sol.fallback);
  EXPECT_NEAR(sol.residual_inf, 127.5, 1e-3);
  EXPECT_NEAR(sol.x[0], 127.5, 1e-3);
  EXPECT_NEAR(sol.x[1], 127.5, 1e-3);
}

TEST(SolveQp, RowOutOfReachIsInfeasible) {
  sp::Matrix W(1, 2);
  W(0, 0) = 1.5; W(0, 1) = -0.5;
  // reach of the row is [-127.5, 382.5]; ask for more than that
  const std::vector<double> s = {0, 0}, t = {400};
  const auto sol = sp::solve_1d_qp(W, s, t, 1.0);
  EXPECT_FALSE(sol.feasible);
  EXPECT_NEAR(sol.x[0], 255.0, 1e-3);
  EXPECT_NEAR(sol.x[1], 0.0, 1e-3);
}

TEST(SolveQp, ValidatesInputs) {
  sp::Matrix W(1, 2);
  W(0, 0) = 0.6; W(0, 1) = 0.6;
  const std::vector<double> s = {0, 0}, t = {1};
  EXPECT_THROW(sp::solve_1d_qp(W, s, t, 1.0), sp::Error);
  W(0, 1) = 0.4;
  const std::vector<double> short_s = {0};
  EXPECT_THROW(sp::solve_1d_qp(W, short_s, t, 1.0), sp::Error);
  EXPECT_THROW(sp::solve_1d_qp(W, s, t, -1.0), sp::Error);
  sp::Matrix tall(3, 2, 0.5);
  const std::vector<double> t3 = {1, 1, 1};
  EXPECT_THROW(sp::solve_1d_qp(tall, s, t3, 1.0), sp::Error);
}

TEST(SolveQp, Deterministic) {
  std::mt19937_64 rng(77);
  const auto q = sp::testing::random_feasible_qp(rng);
  const auto a = sp::solve_1d_qp(q.W, q.s, q.t, q.eps);
  const auto b = sp::solve_1d_qp(q.W, q.s, q.t, q.eps);
  EXPECT_EQ(a.x, b.x);
}
