#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabguard/common.hpp"

namespace tabguard {

enum class FeatureKind { Numeric, Categorical };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& text);

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  std::optional<double> lower;  // original units, numeric only
  std::optional<double> upper;
  bool immutable = false;
  bool sensitive = false;

  bool operator==(const FeatureSpec&) const = default;
};

/// Column roles and per-feature constraints for one tabular dataset.
///
/// JSON form:
///   { "features": [{"name", "kind", "lower", "upper", "immutable", "sensitive"}],
///     "target": "...", "positive_label": "...", "ids": [...],
///     "clip": {"enabled": true, "lower": 0.01, "upper": 0.99} }
/// `clip` is optional and overrides the default 1st/99th percentile clipping.
struct DatasetSchema {
  std::vector<FeatureSpec> features;
  std::string target;
  std::vector<std::string> ids;
  std::string positive_label = "1";
  bool clip_enabled = true;
  double clip_lower = 0.01;
  double clip_upper = 0.99;

  /// Throws SchemaError on duplicate names, id/feature overlap, inverted bounds,
  /// or bounds on a categorical feature.
  void validate() const;
  const FeatureSpec* find(const std::string& name) const;
  std::optional<std::size_t> sensitive_feature() const;

  nlohmann::ordered_json to_json() const;
  static DatasetSchema from_json(const nlohmann::json& j);
  /// Stable hex digest of the canonical JSON form.
  std::string fingerprint() const;

  bool operator==(const DatasetSchema&) const = default;
};

DatasetSchema load_schema(const std::filesystem::path& path);
void save_schema(const DatasetSchema& schema, const std::filesystem::path& path);

using Cell = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<std::monostate>(c); }

/// Column-ordered cells. Numeric feature and auxiliary columns hold doubles,
/// categorical/id/raw-target columns hold strings, and missing cells hold
/// std::monostate. After target normalization the target column holds 0.0/1.0.
struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> cells;  // cells[column][row]
  std::size_t rows = 0;
  bool target_normalized = false;

  std::size_t column_index(const std::string& name) const;
  bool has_column(const std::string& name) const;
  const std::vector<Cell>& column(const std::string& name) const;
  std::vector<Cell>& column(const std::string& name);

  RawTable select_rows(std::span<const std::size_t> rows) const;
  /// Normalized 0/1 labels; requires target_normalized.
  Labels labels(const DatasetSchema& schema) const;
  /// Numeric values of a column, with `fallback` substituted for missing cells.
  std::vector<double> numeric_column(const std::string& name, double fallback) const;
  std::vector<std::string> string_column(const std::string& name) const;

  bool operator==(const RawTable&) const = default;
};

/// Reads an RFC-4180 CSV with a header row. Loads every schema column plus the
/// listed auxiliary numeric columns (exposure data, etc.); other columns are
/// ignored.
RawTable load_csv(const std::filesystem::path& path, const DatasetSchema& schema,
                  std::span<const std::string> aux_columns = {});
RawTable parse_csv(const std::string& text, const DatasetSchema& schema,
                   std::span<const std::string> aux_columns = {});
void write_csv(const RawTable& table, const std::filesystem::path& path);
std::string to_csv(const RawTable& table);

/// Maps the raw target to {0, 1} via schema.positive_label. Idempotent.
RawTable normalize_target(const RawTable& raw, const DatasetSchema& schema);

struct NumericCleaning {
  double median = 0.0;
  double clip_lo = 0.0;
  double clip_hi = 0.0;
  bool operator==(const NumericCleaning&) const = default;
};

/// Imputation values and clip bounds, estimated from one set of rows.
struct CleaningStats {
  std::map<std::string, NumericCleaning> numeric;
  std::map<std::string, std::string> categorical_mode;

  nlohmann::ordered_json to_json() const;
  static CleaningStats from_json(const nlohmann::json& j);
  bool operator==(const CleaningStats&) const = default;
};

/// Percentile used for outlier clipping: the order statistic at index
/// round(q*(n-1)) of the ascending sample. An order statistic (rather than an
/// interpolated value) keeps cleaning idempotent.
double clip_percentile(std::span<const double> sorted, double q);

CleaningStats fit_cleaning(const RawTable& raw, const DatasetSchema& schema);
RawTable apply_cleaning(const RawTable& raw, const DatasetSchema& schema, const CleaningStats& stats);
/// Impute (median / mode), then clip numeric columns, then normalize the target.
RawTable clean(const RawTable& raw, const DatasetSchema& schema);

struct ColumnInfo {
  std::string feature;
  FeatureKind kind = FeatureKind::Numeric;
  std::string category;       // categorical columns only
  bool unknown_bucket = false;
  bool operator==(const ColumnInfo&) const = default;
};

struct NumericScaler {
  std::string feature;
  double mean = 0.0;
  double std = 1.0;  // population standard deviation
  bool operator==(const NumericScaler&) const = default;
};

struct CategoryMap {
  std::string feature;
  std::vector<std::string> categories;  // sorted; index categories.size() is "unknown"
  std::size_t index_of(const std::string& value) const;
  bool operator==(const CategoryMap&) const = default;
};

struct Encoded {
  Matrix X;
  Labels y;
};

/// Training-split statistics that map cleaned rows into the normalized
/// feature space where attack budgets are defined.
class Preprocessor {
 public:
  Preprocessor() = default;

  std::size_t dimension() const { return columns_.size(); }
  const std::vector<ColumnInfo>& columns() const { return columns_; }
  std::vector<std::string> column_names() const;
  /// Active (non-dropped) feature names in schema order.
  const std::vector<std::string>& features() const { return features_; }
  /// Matrix columns belonging to each active feature, aligned with features().
  std::vector<std::vector<std::size_t>> feature_groups() const;
  std::vector<std::size_t> columns_of(const std::string& feature) const;

  const std::vector<NumericScaler>& scalers() const { return scalers_; }
  const std::vector<CategoryMap>& category_maps() const { return category_maps_; }
  const CleaningStats& cleaning() const { return cleaning_; }
  const std::vector<std::string>& dropped() const { return dropped_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const NumericScaler* scaler(const std::string& feature) const;

  /// Imputes and clips with the stored cleaning statistics, standardizes
  /// numeric features, and one-hot encodes categoricals.
  Encoded transform(const RawTable& rows, const DatasetSchema& schema) const;
  /// Original-unit values of the numeric columns of X (other columns untouched).
  Matrix inverse_transform(const Matrix& X) const;
  /// Human-readable original-unit value of each active feature in one row.
  std::vector<std::string> decode_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

  nlohmann::ordered_json to_json() const;
  static Preprocessor from_json(const nlohmann::json& j);
  bool operator==(const Preprocessor&) const = default;

  friend Preprocessor fit_preprocessor(const RawTable&, const DatasetSchema&, const CleaningStats*);

 private:
  std::vector<std::string> features_;
  std::vector<ColumnInfo> columns_;
  std::vector<NumericScaler> scalers_;
  std::vector<CategoryMap> category_maps_;
  CleaningStats cleaning_;
  std::vector<std::string> dropped_;
  std::vector<std::string> warnings_;
};

/// Fits the scaler and category maps on (cleaned) training rows. Cleaning
/// statistics default to those estimated from the same rows.
Preprocessor fit_preprocessor(const RawTable& train_rows, const DatasetSchema& schema,
                              const CleaningStats* cleaning = nullptr);

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::array<double, 3> ratios{0.6, 0.2, 0.2};
  std::uint64_t seed = 0;
};

Splits stratified_split(std::span<const int> labels, std::array<double, 3> ratios,
                        std::uint64_t seed);

struct SyntheticDataset {
  RawTable table;
  DatasetSchema schema;
};

/// Seeded credit-style dataset whose default label follows a logistic model
/// of the latent feature values. Column layout: id, numeric features,
/// categorical features, "default".
SyntheticDataset generate_synthetic_credit(std::size_t n, std::size_t d_numeric,
                                           std::size_t d_categorical, double default_rate,
                                           std::uint64_t seed);

}  // namespace tabguard
