#include "tabguard/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tabguard {

namespace {

void require_same_length(const ScoredSet& s) {
  if (s.scores.size() != s.labels.size()) {
    throw ShapeError("scored set has " + std::to_string(s.scores.size()) + " scores and " +
                     std::to_string(s.labels.size()) + " labels");
  }
}

void require_both_classes(const ScoredSet& s) {
  require_same_length(s);
  const std::size_t pos = s.positives();
  if (pos == 0 || pos == s.size()) {
    throw MetricError("discrimination metric needs both classes (scenario '" + s.scenario + "')");
  }
}

std::vector<std::size_t> order_by_score(const ScoredSet& s) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });
  return order;
}

}  // namespace

ScoredSet::ScoredSet(std::vector<double> s, Labels y, std::string tag)
    : scores(std::move(s)), labels(std::move(y)), scenario(std::move(tag)) {
  require_same_length(*this);
}

ScoredSet::ScoredSet(const Vector& s, Labels y, std::string tag)
    : scores(s.data(), s.data() + s.size()), labels(std::move(y)), scenario(std::move(tag)) {
  require_same_length(*this);
}

std::size_t ScoredSet::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

ScoredSet ScoredSet::subset(std::span<const std::size_t> rows) const {
  ScoredSet out;
  out.scenario = scenario;
  out.scores.reserve(rows.size());
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) {
    out.scores.push_back(scores[r]);
    out.labels.push_back(labels[r]);
  }
  return out;
}

double auroc(const ScoredSet& s) {
  require_both_classes(s);
  const auto order = order_by_score(s);
  // Sum of average ranks of the positives.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && s.scores[order[j + 1]] == s.scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (s.labels[order[k]] == 1) rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double n_pos = static_cast<double>(s.positives());
  const double n_neg = static_cast<double>(s.negatives());
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double ks_stat(const ScoredSet& s) {
  require_both_classes(s);
  const auto order = order_by_score(s);
  const double n_pos = static_cast<double>(s.positives());
  const double n_neg = static_cast<double>(s.negatives());
  std::size_t c_pos = 0, c_neg = 0;
  double best = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = s.scores[order[i]];
    while (i < order.size() && s.scores[order[i]] == t) {
      (s.labels[order[i]] == 1 ? c_pos : c_neg) += 1;
      ++i;
    }
    best = std::max(best, std::abs(static_cast<double>(c_pos) / n_pos -
                                   static_cast<double>(c_neg) / n_neg));
  }
  return best;
}

double gini(const ScoredSet& s) { return 2.0 * auroc(s) - 1.0; }

double accuracy(const ScoredSet& s, double tau) {
  require_same_length(s);
  if (!(tau >= 0.0 && tau <= 1.0)) throw ParamError("accuracy threshold must lie in [0, 1]");
  if (s.size() == 0) throw MetricError("accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    hits += static_cast<std::size_t>((s.scores[i] >= tau ? 1 : 0) == s.labels[i]);
  }
  return static_cast<double>(hits) / static_cast<double>(s.size());
}

double brier(const ScoredSet& s) {
  require_same_length(s);
  if (s.size() == 0) throw MetricError("Brier score of an empty set");
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = s.scores[i] - static_cast<double>(s.labels[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(s.size());
}

std::size_t equal_width_bin(double score, std::size_t bins) {
  const double p = std::clamp(score, 0.0, 1.0);
  const double m = static_cast<double>(bins);
  auto idx = static_cast<std::size_t>(std::max(0.0, std::ceil(p * m) - 1.0));
  idx = std::min(idx, bins - 1);
  // Correct the floating-point guess against the exact edges m/M.
  while (idx > 0 && p <= static_cast<double>(idx) / m) --idx;
  while (idx + 1 < bins && p > static_cast<double>(idx + 1) / m) ++idx;
  return idx;
}

EceResult ece(const ScoredSet& s, std::size_t bins, Binning binning) {
  require_same_length(s);
  if (bins == 0) throw ParamError("ECE needs at least one bin");
  if (s.size() == 0) throw MetricError("ECE of an empty set");
  EceResult out;
  out.reliability.total = s.size();
  out.reliability.bins.resize(bins);
  std::vector<double> score_sum(bins, 0.0), label_sum(bins, 0.0);

  if (binning == Binning::EqualWidth) {
    for (std::size_t m = 0; m < bins; ++m) {
      out.reliability.bins[m].lower = static_cast<double>(m) / static_cast<double>(bins);
      out.reliability.bins[m].upper = static_cast<double>(m + 1) / static_cast<double>(bins);
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::size_t m = equal_width_bin(s.scores[i], bins);
      ++out.reliability.bins[m].count;
      score_sum[m] += s.scores[i];
      label_sum[m] += s.labels[i];
    }
  } else {
    const auto order = order_by_score(s);
    const std::size_t n = order.size();
    for (std::size_t m = 0; m < bins; ++m) {
      const std::size_t begin = m * n / bins;
      const std::size_t end = (m + 1) * n / bins;
      auto& b = out.reliability.bins[m];
      b.lower = begin < n ? s.scores[order[begin]] : 1.0;
      b.upper = end > 0 && end > begin ? s.scores[order[end - 1]] : b.lower;
      for (std::size_t k = begin; k < end; ++k) {
        ++b.count;
        score_sum[m] += s.scores[order[k]];
        label_sum[m] += s.labels[order[k]];
      }
    }
  }

  const double n = static_cast<double>(s.size());
  for (std::size_t m = 0; m < bins; ++m) {
    auto& b = out.reliability.bins[m];
    if (b.count == 0) continue;
    const double c = static_cast<double>(b.count);
    b.confidence = score_sum[m] / c;
    b.accuracy = label_sum[m] / c;
    out.ece += (c / n) * std::abs(b.accuracy - b.confidence);
  }
  return out;
}

std::vector<CapPoint> cap_curve(const ScoredSet& s) {
  require_both_classes(s);
  auto order = order_by_score(s);
  std::reverse(order.begin(), order.end());
  const double n = static_cast<double>(s.size());
  const double n_pos = static_cast<double>(s.positives());
  std::vector<CapPoint> curve{{0.0, 0.0}};
  std::size_t seen = 0, captured = 0, i = 0;
  while (i < order.size()) {
    const double t = s.scores[order[i]];
    while (i < order.size() && s.scores[order[i]] == t) {
      ++seen;
      captured += static_cast<std::size_t>(s.labels[order[i]] == 1);
      ++i;
    }
    curve.push_back({static_cast<double>(seen) / n, static_cast<double>(captured) / n_pos});
  }
  return curve;
}

}  // namespace tabguard
