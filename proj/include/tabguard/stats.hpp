#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include <nlohmann/json.hpp>

#include "tabguard/common.hpp"

namespace tabguard {

/// A statistic evaluated on a multiset of row indices (a resample). Throwing
/// MetricError or returning a non-finite value marks the replicate undefined.
using IndexMetric = std::function<double(std::span<const std::size_t> rows)>;

struct BootstrapCI {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  std::size_t replicates = 1000;
  std::size_t discarded = 0;
  std::uint64_t seed = 0;
};

struct BootstrapConfig {
  std::size_t replicates = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static BootstrapConfig from_json(const nlohmann::json& j, BootstrapConfig defaults);
};

/// Row indices of replicate b: n draws with replacement from a stream seeded
/// by (seed, b).
std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t b);

/// Percentile bootstrap. Throws StatsError when more than 10% of the
/// replicates are undefined.
BootstrapCI bootstrap_ci(const IndexMetric& metric, std::size_t n, const BootstrapConfig& cfg);

struct PairedBootstrap {
  BootstrapCI a;
  BootstrapCI b;
  BootstrapCI difference;  // a - b on the same resample
};

/// Both metrics are evaluated on identical resamples.
PairedBootstrap paired_bootstrap(const IndexMetric& a, const IndexMetric& b, std::size_t n,
                                 const BootstrapConfig& cfg);

/// True iff the intervals are disjoint (strict inequality). Both must share a level.
bool ci_separated(const BootstrapCI& a, const BootstrapCI& b);

}  // namespace tabguard
