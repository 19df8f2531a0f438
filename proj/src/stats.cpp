#include "tabguard/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tabguard {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void BootstrapConfig::validate() const {
  if (replicates < 100) throw ParamError("bootstrap needs at least 100 replicates");
  if (!(level > 0.0 && level < 1.0)) throw ParamError("bootstrap level must lie in (0, 1)");
}

ojson BootstrapConfig::to_json() const {
  ojson j;
  j["bootstrap_b"] = replicates;
  j["level"] = level;
  j["seed"] = seed;
  return j;
}

BootstrapConfig BootstrapConfig::from_json(const json& j, BootstrapConfig c) {
  if (!j.is_null()) {
    c.replicates = j.value("bootstrap_b", c.replicates);
    c.level = j.value("level", c.level);
    c.seed = j.value("seed", c.seed);
  }
  c.validate();
  return c;
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t b) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = rng.index(n);
  return rows;
}

namespace {

constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

double evaluate(const IndexMetric& metric, std::span<const std::size_t> rows) {
  try {
    const double v = metric(rows);
    return std::isfinite(v) ? v : kUndefined;
  } catch (const MetricError&) {
    return kUndefined;
  }
}

BootstrapCI interval(std::vector<double> values, double point, const BootstrapConfig& cfg, const char* what) {
  BootstrapCI ci;
  ci.point = point;
  ci.level = cfg.level;
  ci.replicates = cfg.replicates;
  ci.seed = cfg.seed;
  std::vector<double> ok;
  ok.reserve(values.size());
  for (double v : values) {
    if (std::isnan(v)) {
      ++ci.discarded;
    } else {
      ok.push_back(v);
    }
  }
  if (10 * ci.discarded > cfg.replicates || ok.empty()) {
    throw StatsError(std::string(what) + ": metric undefined on " + std::to_string(ci.discarded) + " of " +
                     std::to_string(cfg.replicates) + " bootstrap replicates");
  }
  std::sort(ok.begin(), ok.end());
  const double tail = (1.0 - cfg.level) / 2.0;
  ci.lower = quantile_sorted(ok, tail);
  ci.upper = quantile_sorted(ok, 1.0 - tail);
  return ci;
}

std::vector<std::size_t> identity(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace

BootstrapCI bootstrap_ci(const IndexMetric& metric, std::size_t n, const BootstrapConfig& cfg) {
  cfg.validate();
  if (n == 0) throw DataError("bootstrap on empty data");
  std::vector<double> values(cfg.replicates);
  parallel_for_blocks(cfg.replicates, cfg.threads ? cfg.threads : default_thread_count(),
                      [&](std::size_t b, std::size_t e) {
                        for (std::size_t k = b; k < e; ++k) values[k] = evaluate(metric, bootstrap_indices(n, cfg.seed, k));
                      });
  return interval(std::move(values), metric(identity(n)), cfg, "bootstrap");
}

PairedBootstrap paired_bootstrap(const IndexMetric& a, const IndexMetric& b, std::size_t n,
                                 const BootstrapConfig& cfg) {
  cfg.validate();
  if (n == 0) throw DataError("bootstrap on empty data");
  std::vector<double> va(cfg.replicates), vb(cfg.replicates), vd(cfg.replicates);
  parallel_for_blocks(cfg.replicates, cfg.threads ? cfg.threads : default_thread_count(),
                      [&](std::size_t lo, std::size_t hi) {
                        for (std::size_t k = lo; k < hi; ++k) {
                          const auto rows = bootstrap_indices(n, cfg.seed, k);
                          va[k] = evaluate(a, rows);
                          vb[k] = evaluate(b, rows);
                          vd[k] = va[k] - vb[k];
                        }
                      });
  const auto all = identity(n);
  const double pa = a(all), pb = b(all);
  PairedBootstrap out;
  out.a = interval(std::move(va), pa, cfg, "paired bootstrap (first metric)");
  out.b = interval(std::move(vb), pb, cfg, "paired bootstrap (second metric)");
  out.difference = interval(std::move(vd), pa - pb, cfg, "paired bootstrap (difference)");
  return out;
}

bool ci_separated(const BootstrapCI& a, const BootstrapCI& b) {
  if (a.level != b.level) throw ParamError("ci_separated: intervals have different levels");
  return a.upper < b.lower || b.upper < a.lower;
}

}  // namespace tabguard
