#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tabguard/common.hpp"

namespace tabguard {

using PredictFn = std::function<Vector(const Matrix&)>;
/// Matrix columns that switch on and off together (one entry per player).
using FeatureGroups = std::vector<std::vector<std::size_t>>;

/// Each column is its own player.
FeatureGroups singleton_groups(std::size_t d);

struct Attribution {
  Vector values;  // one per group
  double base = 0.0;        // mean prediction over the background
  double prediction = 0.0;  // f(x)
};

struct ShapConfig {
  std::size_t n_coalitions = 2048;
  std::size_t background_size = 100;
  std::size_t n_instances = 200;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

/// Kernel SHAP with interventional masking: absent players take their values
/// from each background row in turn and the predictions are averaged.
/// All 2^M - 2 proper coalitions are used with exact kernel weights when they
/// fit in the budget; otherwise complement pairs are sampled with sizes drawn
/// in proportion to the Shapley kernel. Efficiency (base + sum = prediction)
/// is imposed exactly by eliminating the last player from the regression.
Attribution kernel_shap(const PredictFn& f, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                        const Matrix& background, const FeatureGroups& groups, std::size_t n_coalitions,
                        std::uint64_t seed);

/// Rows drawn without replacement (all rows when size >= rows).
Matrix sample_background(const Matrix& X, std::size_t size, std::uint64_t seed);

/// Cosine similarity; two zero vectors give 1 and exactly one zero vector gives 0.
double cosine_sim(const Vector& a, const Vector& b);
/// Spearman rank correlation with average ranks for ties; throws MetricError
/// if either vector is constant.
double spearman(const Vector& a, const Vector& b);
double l2_dist(const Vector& a, const Vector& b);

/// Average ranks (1-based), ties sharing the mean of their positions.
std::vector<double> average_ranks(const Vector& v);

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double p5 = 0.0;
};

Summary summarize(std::vector<double> values);

struct StabilityStats {
  std::vector<std::size_t> rows;  // instance rows that produced all three metrics
  std::vector<double> cosine;
  std::vector<double> spearman;
  std::vector<double> l2;
  std::vector<Attribution> clean;
  std::vector<Attribution> adversarial;
  Summary cosine_summary;
  Summary spearman_summary;
  Summary l2_summary;
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;
};

/// Attributions for the first n_instances rows under clean and adversarial
/// inputs, with the same per-row seed and background for both.
StabilityStats stability_report(const PredictFn& f, const Matrix& X_clean, const Matrix& X_adv,
                                const Matrix& background, const FeatureGroups& groups,
                                std::size_t n_instances, std::size_t n_coalitions, std::uint64_t seed,
                                std::size_t threads = 0);

}  // namespace tabguard
