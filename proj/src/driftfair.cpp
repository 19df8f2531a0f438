#include "tabguard/driftfair.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tabguard/dataio.hpp"

namespace tabguard {

namespace {

void require_nonempty(std::span<const double> a, const char* what) {
  if (a.empty()) throw DataError(std::string(what) + ": empty sample");
}

std::vector<double> sorted_copy(std::span<const double> a) {
  std::vector<double> s(a.begin(), a.end());
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

std::vector<double> psi_edges(std::span<const double> baseline, std::size_t bins) {
  require_nonempty(baseline, "psi");
  if (bins < 2) throw ParamError("psi needs at least 2 bins");
  const auto s = sorted_copy(baseline);
  std::vector<double> edges;
  for (std::size_t k = 1; k < bins; ++k) {
    const double e = quantile_sorted(s, static_cast<double>(k) / static_cast<double>(bins));
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  // An edge at the sample maximum would leave the last bin empty by construction.
  while (!edges.empty() && edges.back() >= s.back()) edges.pop_back();
  return edges;
}

std::vector<double> bin_fractions(std::span<const double> sample, std::span<const double> edges) {
  require_nonempty(sample, "bin_fractions");
  std::vector<double> counts(edges.size() + 1, 0.0);
  for (double v : sample) {
    const auto k = static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), v) - edges.begin());
    counts[k] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(sample.size());
  return counts;
}

double psi_from_probabilities(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw DataError("psi: probability vectors differ in length");
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double pk = std::max(p[k], kPsiFloor);
    const double qk = std::max(q[k], kPsiFloor);
    total += (pk - qk) * std::log(pk / qk);
  }
  return total;
}

double psi_with_edges(std::span<const double> a, std::span<const double> b, std::span<const double> edges) {
  require_nonempty(a, "psi");
  require_nonempty(b, "psi");
  return psi_from_probabilities(bin_fractions(a, edges), bin_fractions(b, edges));
}

double psi(std::span<const double> baseline, std::span<const double> shifted, std::size_t bins) {
  require_nonempty(shifted, "psi");
  const auto edges = psi_edges(baseline, bins);
  return psi_with_edges(baseline, shifted, edges);
}

double ks_distance(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, "ks_distance");
  require_nonempty(b, "ks_distance");
  const auto sa = sorted_copy(a), sb = sorted_copy(b);
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double t;
    if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) {
      t = sa[i];
    } else {
      t = sb[j];
    }
    while (i < sa.size() && sa[i] == t) ++i;
    while (j < sb.size() && sb[j] == t) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, "wasserstein1");
  require_nonempty(b, "wasserstein1");
  const auto sa = sorted_copy(a), sb = sorted_copy(b);
  if (sa.size() == sb.size()) {
    double sum = 0.0;
    for (std::size_t k = 0; k < sa.size(); ++k) sum += std::abs(sa[k] - sb[k]);
    return sum / static_cast<double>(sa.size());
  }
  std::vector<double> points;
  points.reserve(sa.size() + sb.size());
  std::merge(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(points));
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  double total = 0.0;
  std::size_t i = 0, j = 0;
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    while (i < sa.size() && sa[i] <= points[k]) ++i;
    while (j < sb.size() && sb[j] <= points[k]) ++j;
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (points[k + 1] - points[k]);
  }
  return total;
}

namespace {

struct GroupIndex {
  std::vector<std::string> names;       // sorted
  std::vector<std::size_t> membership;  // per row
};

GroupIndex index_groups(std::span<const std::string> groups) {
  GroupIndex g;
  g.names.assign(groups.begin(), groups.end());
  std::sort(g.names.begin(), g.names.end());
  g.names.erase(std::unique(g.names.begin(), g.names.end()), g.names.end());
  g.membership.reserve(groups.size());
  for (const auto& v : groups) {
    g.membership.push_back(static_cast<std::size_t>(std::lower_bound(g.names.begin(), g.names.end(), v) -
                                                    g.names.begin()));
  }
  return g;
}

std::vector<GroupRates> group_rates(std::span<const double> scores, std::span<const int> labels,
                                    const GroupIndex& gi, double tau) {
  std::vector<GroupRates> out(gi.names.size());
  std::vector<std::size_t> flagged(out.size(), 0), tp(out.size(), 0);
  for (std::size_t k = 0; k < out.size(); ++k) out[k].group = gi.names[k];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    auto& g = out[gi.membership[i]];
    const bool pred = scores[i] >= tau;
    ++g.count;
    flagged[gi.membership[i]] += pred;
    if (!labels.empty() && labels[i] == 1) {
      ++g.positives;
      tp[gi.membership[i]] += pred;
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].positive_rate = static_cast<double>(flagged[k]) / static_cast<double>(out[k].count);
    out[k].tpr = out[k].positives ? static_cast<double>(tp[k]) / static_cast<double>(out[k].positives)
                                  : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw ShapeError("fairness: scores and groups differ in length");
}

GroupIndex two_groups(std::span<const std::string> groups) {
  GroupIndex gi = index_groups(groups);
  if (gi.names.size() != 2) {
    throw MetricError("expected exactly two groups, found " + std::to_string(gi.names.size()));
  }
  return gi;
}

}  // namespace

double demographic_parity_diff(std::span<const double> scores, std::span<const std::string> groups, double tau) {
  check_lengths(scores.size(), groups.size());
  const GroupIndex gi = two_groups(groups);
  const auto r = group_rates(scores, {}, gi, tau);
  return r[0].positive_rate - r[1].positive_rate;
}

double equal_opportunity_diff(std::span<const double> scores, std::span<const int> labels,
                              std::span<const std::string> groups, double tau) {
  check_lengths(scores.size(), groups.size());
  check_lengths(scores.size(), labels.size());
  const GroupIndex gi = two_groups(groups);
  const auto r = group_rates(scores, labels, gi, tau);
  for (const auto& g : r) {
    if (g.positives == 0) throw MetricError("group '" + g.group + "' has no positive-label rows");
  }
  return r[0].tpr - r[1].tpr;
}

FairnessReport fairness_report(const std::string& attribute, std::span<const double> scores,
                               std::span<const int> labels, std::span<const std::string> groups, double tau) {
  check_lengths(scores.size(), groups.size());
  check_lengths(scores.size(), labels.size());
  const GroupIndex gi = index_groups(groups);
  if (gi.names.size() < 2) throw MetricError("fairness needs at least two groups for '" + attribute + "'");
  FairnessReport rep;
  rep.attribute = attribute;
  rep.tau = tau;
  rep.groups = group_rates(scores, labels, gi, tau);
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  if (rep.groups.size() == 2) {
    const auto& a = rep.groups[0];
    const auto& b = rep.groups[1];
    const std::string key = a.group + "-" + b.group;
    rep.reference_group = b.group;
    rep.demographic_parity[key] = a.positive_rate - b.positive_rate;
    rep.equal_opportunity[key] = (a.positives && b.positives) ? a.tpr - b.tpr : nan;
    return rep;
  }
  std::size_t ref = 0;
  for (std::size_t k = 1; k < rep.groups.size(); ++k) {
    if (rep.groups[k].count > rep.groups[ref].count) ref = k;
  }
  const auto& r = rep.groups[ref];
  rep.reference_group = r.group;
  for (std::size_t k = 0; k < rep.groups.size(); ++k) {
    if (k == ref) continue;
    const auto& g = rep.groups[k];
    const std::string key = g.group + "-" + r.group;
    rep.demographic_parity[key] = g.positive_rate - r.positive_rate;
    rep.equal_opportunity[key] = (g.positives && r.positives) ? g.tpr - r.tpr : nan;
  }
  return rep;
}

}  // namespace tabguard
