#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabguard/common.hpp"
#include "tabguard/metrics.hpp"

namespace tabguard {

/// Per-instance loss given default and exposure at default.
struct ExposureBook {
  std::vector<double> lgd;
  std::vector<double> ead;

  static ExposureBook uniform(std::size_t n, double lgd = 0.45, double ead = 1.0);
  std::size_t size() const { return lgd.size(); }
  void validate(std::size_t n) const;
};

struct ExpectedLoss {
  std::vector<double> per_instance;
  double portfolio = 0.0;
};

ExpectedLoss expected_loss(std::span<const double> pd, const ExposureBook& book);

struct LossDistribution {
  std::vector<double> losses;  // simulation order
  std::vector<double> sorted;  // ascending copy for quantile queries
  std::uint64_t seed = 0;
  std::size_t n_sims = 0;

  static LossDistribution from_losses(std::vector<double> losses, std::uint64_t seed = 0);
  double mean() const;
  double stddev() const;
};

/// Monte-Carlo portfolio losses with independent Bernoulli(PD_i) defaults.
/// Simulation k uses its own stream derived from (seed, k), so sharding does
/// not change the result.
LossDistribution simulate_losses(std::span<const double> pd, const ExposureBook& book, std::size_t n_sims,
                                 std::uint64_t seed, std::size_t threads = 0);

/// Empirical generalized inverse: the ceil(alpha * n)-th smallest loss.
double var(const LossDistribution& dist, double alpha = 0.95);
/// Mean of all losses at or above var(dist, alpha).
double es(const LossDistribution& dist, double alpha = 0.95);

struct CostSpec {
  double c_fp = 1.0;
  double c_fn = 5.0;
  void validate() const;
};

struct CostPoint {
  double tau;
  std::size_t fp;
  std::size_t fn;
  double cost;
};

struct CostCurve {
  std::vector<CostPoint> points;
  double best_tau = 0.0;
  double best_cost = 0.0;
};

/// Cost over an inclusive uniform grid on [0, 1]; score >= tau predicts a
/// default. Ties in the minimum go to the smaller tau.
CostCurve cost_curve(const ScoredSet& s, const CostSpec& cost, std::size_t grid_size = 101);

/// c_FN / (c_FN + c_FP).
double bayes_threshold(const CostSpec& cost);

struct EconomicConfusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double tau = 0.5;
  double misclassification_cost = 0.0;
  double fn_expected_loss = 0.0;  // sum over false negatives of PD * LGD * EAD
};

EconomicConfusion economic_confusion(const ScoredSet& s, double tau, const CostSpec& cost,
                                     const ExposureBook& book);

struct EconConfig {
  double lgd_default = 0.45;
  double ead_default = 1.0;
  std::string lgd_column;
  std::string ead_column;
  std::size_t n_sims = 50000;
  double alpha = 0.95;
  double cost_fp = 1.0;
  double cost_fn = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static EconConfig from_json(const nlohmann::json& j, EconConfig defaults);
};

}  // namespace tabguard
