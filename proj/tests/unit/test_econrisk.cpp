#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "tabguard/econrisk.hpp"

using namespace tabguard;

TEST(ExpectedLoss, Formula) {
  const std::vector<double> pd{0.1};
  ExposureBook b{{0.5}, {1000.0}};
  EXPECT_DOUBLE_EQ(expected_loss(pd, b).portfolio, 50.0);
  const std::vector<double> zero(4, 0.0);
  EXPECT_EQ(expected_loss(zero, ExposureBook::uniform(4)).portfolio, 0.0);
  const std::vector<double> p3{0.2, 0.05, 0.6};
  ExposureBook b3{{0.4, 0.9, 0.1}, {100.0, 2000.0, 50.0}};
  EXPECT_NEAR(expected_loss(p3, b3).portfolio, 0.2 * 0.4 * 100 + 0.05 * 0.9 * 2000 + 0.6 * 0.1 * 50, 1e-12);
}

TEST(ExpectedLoss, RejectsBadBook) {
  const std::vector<double> pd{0.1, 0.2};
  EXPECT_THROW(expected_loss(pd, ExposureBook{{0.5}, {1.0}}), DataError);
  EXPECT_THROW(expected_loss(pd, ExposureBook{{0.5, 1.5}, {1.0, 1.0}}), DataError);
}

TEST(Simulation, DegenerateProbabilities) {
  const std::vector<double> ones(3, 1.0), zeros(3, 0.0);
  ExposureBook b{{0.2, 0.5, 1.0}, {10.0, 4.0, 1.0}};
  const double total = 0.2 * 10 + 0.5 * 4 + 1.0;
  for (double l : simulate_losses(ones, b, 1000, 1).losses) ASSERT_EQ(l, total);
  for (double l : simulate_losses(zeros, b, 1000, 1).losses) ASSERT_EQ(l, 0.0);
  EXPECT_THROW(simulate_losses(ones, b, 999, 1), ParamError);
}

TEST(Simulation, MeanNearExpectedLoss) {
  Rng r(2);
  std::vector<double> pd(200);
  for (double& p : pd) p = r.uniform(0.0, 0.4);
  const auto book = ExposureBook::uniform(200, 0.45, 100.0);
  const auto dist = simulate_losses(pd, book, 100000, 7);
  const double se = dist.stddev() / std::sqrt(100000.0);
  EXPECT_NEAR(dist.mean(), expected_loss(pd, book).portfolio, 3 * se);
}

TEST(Simulation, SeedAndThreadDeterminism) {
  const std::vector<double> pd(50, 0.3);
  const auto book = ExposureBook::uniform(50);
  EXPECT_EQ(simulate_losses(pd, book, 2000, 3, 1).losses, simulate_losses(pd, book, 2000, 3, 4).losses);
  EXPECT_NE(simulate_losses(pd, book, 2000, 3).losses, simulate_losses(pd, book, 2000, 4).losses);
}

TEST(Tail, OneToHundredFixture) {
  std::vector<double> l(100);
  std::iota(l.begin(), l.end(), 1.0);
  const auto d = LossDistribution::from_losses(l);
  EXPECT_EQ(var(d, 0.95), 95.0);
  EXPECT_EQ(es(d, 0.95), 97.5);
  EXPECT_EQ(var(d, 0.95), oracle::var_sorted(l, 0.95));
  EXPECT_EQ(es(d, 0.95), oracle::es_tail_mean(l, 0.95));
}

TEST(Tail, ConstantAndMedian) {
  const auto c = LossDistribution::from_losses(std::vector<double>(37, 4.25));
  for (double a : {0.5, 0.9, 0.99}) {
    EXPECT_EQ(var(c, a), 4.25);
    EXPECT_EQ(es(c, a), 4.25);
  }
  const std::vector<double> sym{-3, -2, -1, 0, 1, 2, 3};
  EXPECT_EQ(var(LossDistribution::from_losses(sym), 0.5), oracle::var_sorted(sym, 0.5));
}

TEST(Tail, EsDominatesVar) {
  Rng r(13);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> l(1 + r.index(300));
    for (double& v : l) v = std::exp(r.normal(0.0, 1.5));
    const auto d = LossDistribution::from_losses(l);
    const double a = r.uniform(0.5, 0.999);
    ASSERT_GE(es(d, a), var(d, a));
    ASSERT_EQ(var(d, a), oracle::var_sorted(l, a));
    ASSERT_NEAR(es(d, a), oracle::es_tail_mean(l, a), 1e-12 * es(d, a));  // summation order differs
  }
}

TEST(Cost, BayesThreshold) {
  EXPECT_EQ(bayes_threshold({1, 1}), 0.5);
  EXPECT_DOUBLE_EQ(bayes_threshold({1, 5}), 5.0 / 6.0);
  EXPECT_EQ(bayes_threshold({1, 0}), 0.0);
}

TEST(Cost, CurveCases) {
  // A negative above the last interior grid point, so only tau = 1 clears every false positive.
  const ScoredSet s({0.9, 0.8, 0.7, 0.995, 0.6, 0.4, 0.3, 0.2, 0.1, 0.05}, {1, 1, 1, 0, 1, 0, 0, 1, 0, 0});
  const auto free_fn = cost_curve(s, {1, 0});
  EXPECT_EQ(free_fn.best_tau, 1.0);
  const ScoredSet low({0.9, 0.8, 0.7, 0.65, 0.6, 0.4, 0.3, 0.2, 0.1, 0.05}, {1, 1, 1, 0, 1, 0, 0, 1, 0, 0});
  EXPECT_DOUBLE_EQ(cost_curve(low, {1, 0}).best_tau, 0.66);  // lowest tau with no false positive
  EXPECT_EQ(free_fn.best_cost, 0.0);
  const auto c = cost_curve(s, {1, 5});
  EXPECT_EQ(c.points.front().tau, 0.0);
  EXPECT_EQ(c.points.front().cost, 5.0);  // all flagged: c_FP * negatives
  EXPECT_EQ(c.points.size(), 101u);
  const ScoredSet perfect({0.9, 0.8, 0.85, 0.2, 0.1, 0.3, 0.15, 0.95, 0.05, 0.25}, {1, 1, 1, 0, 0, 0, 0, 1, 0, 0});
  const auto p = cost_curve(perfect, {1, 5});
  EXPECT_EQ(p.best_cost, 0.0);
  EXPECT_GT(p.best_tau, 0.3);
  EXPECT_LE(p.best_tau, 0.8);
}

TEST(Confusion, Cases) {
  const ScoredSet s({0.9, 0.7, 0.6, 0.4, 0.2, 0.1}, {1, 0, 1, 1, 0, 0});
  ExposureBook b{{0.5, 0.5, 0.5, 0.5, 0.5, 0.5}, {100, 100, 100, 200, 100, 100}};
  const auto c = economic_confusion(s, 0.5, {1, 5}, b);
  EXPECT_EQ(c.tp, 2u);
  EXPECT_EQ(c.fp, 1u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.tn, 2u);
  EXPECT_DOUBLE_EQ(c.misclassification_cost, 1 * 1 + 5 * 1);
  EXPECT_DOUBLE_EQ(c.fn_expected_loss, 0.4 * 0.5 * 200);
  const auto z = economic_confusion(s, 0.0, {1, 5}, b);
  EXPECT_EQ(z.fn, 0u);
  EXPECT_EQ(z.fp, 3u);
  const ScoredSet perfect({0.9, 0.1}, {1, 0});
  const auto pc = economic_confusion(perfect, 0.5, {1, 5}, ExposureBook::uniform(2));
  EXPECT_EQ(pc.fp + pc.fn, 0u);
  EXPECT_EQ(pc.misclassification_cost, 0.0);
}
