#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "tabguard/driftfair.hpp"

using namespace tabguard;

namespace {

// (0.5 - 0.9) ln(0.5/0.9) + (0.5 - 0.1) ln(0.5/0.1), evaluated with mpmath.
constexpr double kTwoBinPsi = 0.8788898309344878;

std::vector<double> normals(std::size_t n, double mu, std::uint64_t seed) {
  Rng r(seed);
  std::vector<double> v(n);
  for (double& x : v) x = r.normal(mu, 1.0);
  return v;
}

}  // namespace

TEST(Psi, IdenticalIsZero) {
  const auto a = normals(500, 0, 1);
  EXPECT_LE(psi(a, a), 1e-12);
}

TEST(Psi, TwoBinFixture) {
  const std::vector<double> p{0.5, 0.5}, q{0.9, 0.1};
  EXPECT_NEAR(psi_from_probabilities(p, q), kTwoBinPsi, 1e-12);
  EXPECT_NEAR(psi_from_probabilities(p, q), 0.8789, 1e-4);
}

TEST(Psi, SymmetricOnSharedEdges) {
  const auto a = normals(400, 0, 2), b = normals(300, 0.4, 3);
  const auto edges = psi_edges(a, 10);
  EXPECT_NEAR(psi_with_edges(a, b, edges), psi_with_edges(b, a, edges), 1e-12);
  EXPECT_GT(psi(a, b), 0.0);
}

TEST(Psi, EdgesFromBaselineQuantiles) {
  std::vector<double> a(100);
  for (int i = 0; i < 100; ++i) a[i] = i;
  const auto e = psi_edges(a, 4);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_DOUBLE_EQ(e[0], 24.75);
  EXPECT_DOUBLE_EQ(e[1], 49.5);
  const auto f = bin_fractions(a, e);
  for (double x : f) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(Ks, Cases) {
  const auto a = normals(200, 0, 4);
  EXPECT_EQ(ks_distance(a, a), 0.0);
  EXPECT_EQ(ks_distance(std::vector<double>{1, 2, 3}, std::vector<double>{5, 6}), 1.0);
  const std::vector<double> x{0.1, 0.5, 0.5, 0.9, 1.3, 2.0, 2.2}, y{0.3, 0.5, 1.0, 1.1, 1.7, 2.5, 3.0, 0.0};
  EXPECT_EQ(ks_distance(x, y), oracle::ks_two_sample(x, y));
}

TEST(Wasserstein, Cases) {
  const auto a = normals(300, 0, 5);
  EXPECT_LE(wasserstein1(a, a), 1e-12);
  auto b = a;
  for (double& x : b) x += 0.75;
  EXPECT_NEAR(wasserstein1(a, b), 0.75, 1e-12);
  const std::vector<double> u{0, 1}, v{0, 0, 3};
  EXPECT_NEAR(wasserstein1(u, v), 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(wasserstein1(u, v), oracle::wasserstein_cdf(u, v), 1e-12);
}

TEST(Wasserstein, TriangleInequality) {
  Rng r(8);
  for (int t = 0; t < 100; ++t) {
    const auto a = normals(20 + r.index(20), r.normal(), 100 + t);
    const auto b = normals(20 + r.index(20), r.normal(), 200 + t);
    const auto c = normals(20 + r.index(20), r.normal(), 300 + t);
    ASSERT_LE(wasserstein1(a, c), wasserstein1(a, b) + wasserstein1(b, c) + 1e-10);
  }
}

TEST(Fairness, DemographicParity) {
  const std::vector<std::string> g{"A", "A", "B", "B"};
  EXPECT_EQ(demographic_parity_diff(std::vector<double>{0.9, 0.1, 0.8, 0.2}, g, 0.5), 0.0);
  EXPECT_EQ(demographic_parity_diff(std::vector<double>{0.9, 0.8, 0.1, 0.2}, g, 0.5), 1.0);
  // A flags 3 of 4, B flags 1 of 4
  const std::vector<std::string> g8{"A", "A", "A", "A", "B", "B", "B", "B"};
  const std::vector<double> s8{0.9, 0.6, 0.7, 0.2, 0.1, 0.55, 0.3, 0.4};
  EXPECT_DOUBLE_EQ(demographic_parity_diff(s8, g8, 0.5), 0.75 - 0.25);
}

TEST(Fairness, EqualOpportunity) {
  const std::vector<std::string> g{"A", "A", "B", "B"};
  const std::vector<int> y{1, 0, 1, 0};
  EXPECT_EQ(equal_opportunity_diff(std::vector<double>{0.9, 0.1, 0.8, 0.2}, y, g, 0.5), 0.0);
  EXPECT_EQ(equal_opportunity_diff(std::vector<double>{0.9, 0.1, 0.2, 0.2}, y, g, 0.5), 1.0);
  // A: TPR 2/3, B: TPR 1/2
  const std::vector<std::string> g7{"A", "A", "A", "A", "B", "B", "B"};
  const std::vector<int> y7{1, 1, 1, 0, 1, 1, 0};
  const std::vector<double> s7{0.9, 0.7, 0.2, 0.8, 0.6, 0.1, 0.9};
  EXPECT_DOUBLE_EQ(equal_opportunity_diff(s7, y7, g7, 0.5), 2.0 / 3.0 - 0.5);
  EXPECT_THROW(equal_opportunity_diff(std::vector<double>{0.9, 0.1, 0.2, 0.2}, std::vector<int>{1, 0, 0, 0}, g, 0.5),
               MetricError);
}

TEST(Fairness, ReportWithThreeGroups) {
  const std::vector<std::string> g{"a", "a", "a", "b", "b", "c"};
  const std::vector<int> y{1, 0, 1, 1, 0, 0};
  const std::vector<double> s{0.9, 0.6, 0.2, 0.7, 0.1, 0.8};
  const auto r = fairness_report("region", s, y, g, 0.5);
  EXPECT_EQ(r.reference_group, "a");
  ASSERT_EQ(r.groups.size(), 3u);
  EXPECT_TRUE(std::isnan(r.groups[2].tpr));
  EXPECT_DOUBLE_EQ(r.demographic_parity.at("b-a"), 0.5 - 2.0 / 3.0);
}
