#pragma once

#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "tabguard/common.hpp"

namespace tabguard {

/// Scores (probabilities) and 0/1 labels of one evaluation scenario.
struct ScoredSet {
  std::vector<double> scores;
  Labels labels;
  std::string scenario = "clean";

  ScoredSet() = default;
  ScoredSet(std::vector<double> s, Labels y, std::string tag = "clean");
  ScoredSet(const Vector& s, Labels y, std::string tag = "clean");
  ScoredSet(std::initializer_list<double> s, Labels y, std::string tag = "clean")
      : ScoredSet(std::vector<double>(s), std::move(y), std::move(tag)) {}

  std::size_t size() const { return scores.size(); }
  std::size_t positives() const;
  std::size_t negatives() const { return size() - positives(); }
  /// Rows selected by index (bootstrap resamples).
  ScoredSet subset(std::span<const std::size_t> rows) const;
};

/// Mann-Whitney estimate of P(score+ > score-) with ties counted as 1/2.
/// Throws MetricError unless both classes are present.
double auroc(const ScoredSet& s);
/// Max over thresholds of |F1(t) - F0(t)| for the class-conditional empirical CDFs.
double ks_stat(const ScoredSet& s);
double gini(const ScoredSet& s);
/// Fraction of rows where (score >= tau) equals the label.
double accuracy(const ScoredSet& s, double tau = 0.5);
double brier(const ScoredSet& s);

struct ReliabilityBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double confidence = 0.0;  // mean score; 0 when empty
  double accuracy = 0.0;    // empirical positive rate; 0 when empty
};

struct ReliabilityBins {
  std::vector<ReliabilityBin> bins;
  std::size_t total = 0;
};

enum class Binning { EqualWidth, EqualMass };

struct EceResult {
  double ece = 0.0;
  ReliabilityBins reliability;
};

/// Expected calibration error. Equal-width bins are right-closed, (m/M, (m+1)/M],
/// with a score of exactly 0 placed in the first bin. Equal-mass bins split the
/// score-sorted rows into M near-equal groups. Empty bins contribute 0.
EceResult ece(const ScoredSet& s, std::size_t bins = 10, Binning binning = Binning::EqualWidth);

/// Bin index for the equal-width rule above.
std::size_t equal_width_bin(double score, std::size_t bins);

struct CapPoint {
  double population_fraction;
  double captured_fraction;
};

/// Cumulative accuracy profile: rows ranked by descending score, cumulative
/// fraction of positives captured. Tied scores are added as one block.
std::vector<CapPoint> cap_curve(const ScoredSet& s);

}  // namespace tabguard
