#include "tabguard/econrisk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tabguard {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

ExposureBook ExposureBook::uniform(std::size_t n, double lgd, double ead) {
  ExposureBook b{std::vector<double>(n, lgd), std::vector<double>(n, ead)};
  b.validate(n);
  return b;
}

void ExposureBook::validate(std::size_t n) const {
  if (lgd.size() != n || ead.size() != n) {
    throw DataError("exposure book has " + std::to_string(lgd.size()) + "/" + std::to_string(ead.size()) +
                    " entries for " + std::to_string(n) + " instances");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lgd[i] >= 0.0 && lgd[i] <= 1.0)) throw DataError("LGD outside [0, 1] at row " + std::to_string(i));
    if (!(ead[i] >= 0.0) || !std::isfinite(ead[i])) throw DataError("EAD invalid at row " + std::to_string(i));
  }
}

namespace {

void check_pd(std::span<const double> pd) {
  for (std::size_t i = 0; i < pd.size(); ++i) {
    if (!(pd[i] >= 0.0 && pd[i] <= 1.0)) throw ParamError("PD outside [0, 1] at row " + std::to_string(i));
  }
}

}  // namespace

ExpectedLoss expected_loss(std::span<const double> pd, const ExposureBook& book) {
  book.validate(pd.size());
  check_pd(pd);
  ExpectedLoss out;
  out.per_instance.resize(pd.size());
  for (std::size_t i = 0; i < pd.size(); ++i) {
    out.per_instance[i] = pd[i] * book.lgd[i] * book.ead[i];
    out.portfolio += out.per_instance[i];
  }
  return out;
}

LossDistribution LossDistribution::from_losses(std::vector<double> losses, std::uint64_t seed) {
  if (losses.empty()) throw DataError("loss distribution is empty");
  LossDistribution d;
  d.sorted = losses;
  std::sort(d.sorted.begin(), d.sorted.end());
  d.losses = std::move(losses);
  d.seed = seed;
  d.n_sims = d.losses.size();
  return d;
}

double LossDistribution::mean() const {
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

double LossDistribution::stddev() const {
  const double m = mean();
  double ss = 0.0;
  for (double l : losses) ss += (l - m) * (l - m);
  return std::sqrt(ss / static_cast<double>(losses.size()));
}

LossDistribution simulate_losses(std::span<const double> pd, const ExposureBook& book, std::size_t n_sims,
                                 std::uint64_t seed, std::size_t threads) {
  if (n_sims < 1000) throw ParamError("n_sims must be at least 1000");
  book.validate(pd.size());
  check_pd(pd);
  std::vector<double> severity(pd.size());
  for (std::size_t i = 0; i < pd.size(); ++i) severity[i] = book.lgd[i] * book.ead[i];

  std::vector<double> losses(n_sims);
  parallel_for_blocks(n_sims, threads ? threads : default_thread_count(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
      double loss = 0.0;
      for (std::size_t i = 0; i < pd.size(); ++i) {
        if (rng.uniform() < pd[i]) loss += severity[i];
      }
      losses[k] = loss;
    }
  });
  return LossDistribution::from_losses(std::move(losses), seed);
}

double var(const LossDistribution& dist, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParamError("alpha must lie in (0, 1)");
  if (dist.sorted.empty()) throw DataError("loss distribution is empty");
  const double n = static_cast<double>(dist.sorted.size());
  // The small slack keeps alpha * n that is integral in exact arithmetic
  // (0.95 * 100) from rounding up past the intended order statistic.
  auto k = static_cast<std::size_t>(std::ceil(alpha * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, dist.sorted.size());
  return dist.sorted[k - 1];
}

double es(const LossDistribution& dist, double alpha) {
  const double v = var(dist, alpha);
  const auto first = std::lower_bound(dist.sorted.begin(), dist.sorted.end(), v);
  const double sum = std::accumulate(first, dist.sorted.end(), 0.0);
  return sum / static_cast<double>(std::distance(first, dist.sorted.end()));
}

void CostSpec::validate() const {
  if (!(c_fp >= 0.0) || !(c_fn >= 0.0)) throw ParamError("misclassification costs must be >= 0");
  if (c_fp == 0.0 && c_fn == 0.0) throw ParamError("c_FP and c_FN cannot both be zero");
}

CostCurve cost_curve(const ScoredSet& s, const CostSpec& cost, std::size_t grid_size) {
  cost.validate();
  if (grid_size < 2) throw ParamError("cost curve grid needs at least 2 points");
  CostCurve out;
  out.points.reserve(grid_size);
  for (std::size_t g = 0; g < grid_size; ++g) {
    const double tau = static_cast<double>(g) / static_cast<double>(grid_size - 1);
    std::size_t fp = 0, fn = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool flagged = s.scores[i] >= tau;
      if (flagged && s.labels[i] == 0) ++fp;
      if (!flagged && s.labels[i] == 1) ++fn;
    }
    const double c = cost.c_fp * static_cast<double>(fp) + cost.c_fn * static_cast<double>(fn);
    out.points.push_back({tau, fp, fn, c});
    if (g == 0 || c < out.best_cost) {
      out.best_cost = c;
      out.best_tau = tau;
    }
  }
  return out;
}

double bayes_threshold(const CostSpec& cost) {
  cost.validate();
  return cost.c_fn / (cost.c_fn + cost.c_fp);
}

EconomicConfusion economic_confusion(const ScoredSet& s, double tau, const CostSpec& cost,
                                     const ExposureBook& book) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ParamError("threshold must lie in [0, 1]");
  cost.validate();
  book.validate(s.size());
  EconomicConfusion c;
  c.tau = tau;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool flagged = s.scores[i] >= tau;
    if (s.labels[i] == 1) {
      if (flagged) {
        ++c.tp;
      } else {
        ++c.fn;
        c.fn_expected_loss += s.scores[i] * book.lgd[i] * book.ead[i];
      }
    } else {
      (flagged ? c.fp : c.tn) += 1;
    }
  }
  c.misclassification_cost = cost.c_fp * static_cast<double>(c.fp) + cost.c_fn * static_cast<double>(c.fn);
  return c;
}

void EconConfig::validate() const {
  if (!(lgd_default >= 0.0 && lgd_default <= 1.0)) throw ParamError("econ.lgd_default must lie in [0, 1]");
  if (!(ead_default >= 0.0)) throw ParamError("econ.ead_default must be >= 0");
  if (n_sims < 1000) throw ParamError("econ.n_sims must be at least 1000");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParamError("econ.alpha must lie in (0, 1)");
  CostSpec{cost_fp, cost_fn}.validate();
}

ojson EconConfig::to_json() const {
  ojson j;
  j["lgd_default"] = lgd_default;
  j["ead_default"] = ead_default;
  j["lgd_column"] = lgd_column.empty() ? ojson(nullptr) : ojson(lgd_column);
  j["ead_column"] = ead_column.empty() ? ojson(nullptr) : ojson(ead_column);
  j["n_sims"] = n_sims;
  j["alpha"] = alpha;
  j["cost_fp"] = cost_fp;
  j["cost_fn"] = cost_fn;
  j["seed"] = seed;
  return j;
}

EconConfig EconConfig::from_json(const json& j, EconConfig c) {
  if (!j.is_null()) {
    c.lgd_default = j.value("lgd_default", c.lgd_default);
    c.ead_default = j.value("ead_default", c.ead_default);
    if (j.contains("lgd_column") && !j["lgd_column"].is_null()) c.lgd_column = j["lgd_column"].get<std::string>();
    if (j.contains("ead_column") && !j["ead_column"].is_null()) c.ead_column = j["ead_column"].get<std::string>();
    c.n_sims = j.value("n_sims", c.n_sims);
    c.alpha = j.value("alpha", c.alpha);
    c.cost_fp = j.value("cost_fp", c.cost_fp);
    c.cost_fn = j.value("cost_fn", c.cost_fn);
    c.seed = j.value("seed", c.seed);
  }
  c.validate();
  return c;
}

}  // namespace tabguard
