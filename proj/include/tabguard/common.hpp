#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace tabguard {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;

// ---------------------------------------------------------------------------
// Errors. Every failure surfaced by the library is a tabguard::Error carrying
// a stable kind string, so the CLI can report it without knowing the subtype.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define TABGUARD_DEFINE_ERROR(Name, kind_name)                              \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& message) : Error(kind_name, message) {} \
  }

TABGUARD_DEFINE_ERROR(SchemaError, "schema");
TABGUARD_DEFINE_ERROR(DataError, "data");
TABGUARD_DEFINE_ERROR(LabelError, "label");
TABGUARD_DEFINE_ERROR(ParamError, "parameter");
TABGUARD_DEFINE_ERROR(ShapeError, "shape");
TABGUARD_DEFINE_ERROR(TrainingError, "training");
TABGUARD_DEFINE_ERROR(FormatError, "format");
TABGUARD_DEFINE_ERROR(MetricError, "metric");
TABGUARD_DEFINE_ERROR(SolverError, "solver");
TABGUARD_DEFINE_ERROR(ProviderError, "provider");
TABGUARD_DEFINE_ERROR(StatsError, "statistics");
TABGUARD_DEFINE_ERROR(AssemblyError, "assembly");
TABGUARD_DEFINE_ERROR(IoError, "io");

#undef TABGUARD_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Seeds and random numbers.
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Child seed for a numbered stream (row index, replicate index, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;
/// Child seed for a named stage ("split", "train", "attack", ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept;

/// Deterministic generator. All variates are built from raw 64-bit draws so
/// that streams are identical across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, one variate per call).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  void shuffle(std::span<std::size_t> values);

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Row-block parallelism. Callers must make each block's output depend only
// on the row range so that results are independent of the thread count.
// ---------------------------------------------------------------------------

std::size_t default_thread_count();

void parallel_for_blocks(std::size_t n, std::size_t threads,
                         const std::function<void(std::size_t begin, std::size_t end)>& body);

// ---------------------------------------------------------------------------
// Small numeric helpers shared across modules.
// ---------------------------------------------------------------------------

double sigmoid(double z) noexcept;
/// Numerically stable log(1 + exp(z)).
double softplus(double z) noexcept;

Matrix gather_rows(const Matrix& X, std::span<const std::size_t> rows);

template <class T>
std::vector<T> gather(std::span<const T> values, std::span<const std::size_t> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(values[r]);
  return out;
}

/// Quantile of an ascending-sorted sample by linear interpolation between
/// order statistics at position q*(n-1).
double quantile_sorted(std::span<const double> sorted, double q);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);
/// Fixed significant-digit formatting used for CSV tables.
std::string format_sig(double value, int digits = 6);

}  // namespace tabguard
