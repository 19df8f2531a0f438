#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tabguard/common.hpp"

namespace tabguard {

/// Bin edges from baseline quantiles at k/bins, k = 1..bins-1, with
/// duplicates removed (so heavily tied data yields fewer bins). Bins are
/// (-inf, e1], (e1, e2], ..., (e_last, +inf).
std::vector<double> psi_edges(std::span<const double> baseline, std::size_t bins = 10);
/// Fraction of the sample in each bin defined by the interior edges.
std::vector<double> bin_fractions(std::span<const double> sample, std::span<const double> edges);

inline constexpr double kPsiFloor = 1e-6;

/// sum_k (p_k - q_k) ln(p_k / q_k) with both probabilities floored at 1e-6.
double psi_from_probabilities(std::span<const double> p, std::span<const double> q);
/// PSI with edges from the baseline deciles (or `bins` quantiles).
double psi(std::span<const double> baseline, std::span<const double> shifted, std::size_t bins = 10);
/// PSI on caller-supplied interior edges.
double psi_with_edges(std::span<const double> a, std::span<const double> b, std::span<const double> edges);

/// Sup-norm distance between the two empirical CDFs.
double ks_distance(std::span<const double> a, std::span<const double> b);
/// Integral of |F_a - F_b| (equals the mean sorted difference for equal sizes).
double wasserstein1(std::span<const double> a, std::span<const double> b);

struct FeatureDrift {
  std::string feature;
  double psi = 0.0;
  double ks = 0.0;
  double wasserstein = 0.0;
};

struct DriftReport {
  std::vector<FeatureDrift> features;
  FeatureDrift score;  // feature = "score"
  std::vector<double> score_edges;
};

struct GroupRates {
  std::string group;
  std::size_t count = 0;
  std::size_t positives = 0;  // label 1
  double positive_rate = 0.0;  // P(pred = 1)
  double tpr = 0.0;            // P(pred = 1 | y = 1); NaN when the group has no positives
};

struct FairnessReport {
  std::string attribute;
  double tau = 0.5;
  std::vector<GroupRates> groups;  // lexicographic order
  std::string reference_group;     // the largest group; differences are (other - reference) when > 2 groups
  /// With two groups: one entry "A-B" holding rate(A) - rate(B), A < B lexicographically.
  std::map<std::string, double> demographic_parity;
  std::map<std::string, double> equal_opportunity;
};

/// P(pred=1 | first group) - P(pred=1 | second group), groups in lexicographic order.
double demographic_parity_diff(std::span<const double> scores, std::span<const std::string> groups, double tau);
/// TPR(first group) - TPR(second group).
double equal_opportunity_diff(std::span<const double> scores, std::span<const int> labels,
                              std::span<const std::string> groups, double tau);

FairnessReport fairness_report(const std::string& attribute, std::span<const double> scores,
                               std::span<const int> labels, std::span<const std::string> groups, double tau);

}  // namespace tabguard
