#include "tabguard/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace tabguard {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

bool is_missing_token(std::string_view s) {
  return s.empty() || s == "NA" || s == "N/A" || s == "NaN" || s == "nan" || s == "null" ||
         s == "NULL" || s == "?";
}

std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

// RFC-4180 records: quoted fields, doubled quotes, CRLF or LF line endings.
std::vector<std::vector<std::string>> parse_records(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    i = 3;
  }
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    const bool blank = record.size() == 1 && record[0].empty();
    if (!blank) records.push_back(std::move(record));
    record.clear();
    field_started = false;
  };
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
    } else if (c == '\n') {
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field in CSV");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string cell_text(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  return {};
}

std::vector<double> sorted_present(const std::vector<Cell>& column) {
  std::vector<double> values;
  values.reserve(column.size());
  for (const Cell& c : column) {
    if (const auto* d = std::get_if<double>(&c)) values.push_back(*d);
  }
  std::sort(values.begin(), values.end());
  return values;
}

double median_sorted(const std::vector<double>& v) {
  const std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool labels_match(const std::string& raw, const std::string& positive) {
  if (raw == positive) return true;
  const auto a = parse_number(raw);
  const auto b = parse_number(positive);
  return a && b && *a == *b;
}

std::string unknown_name(const std::string& feature) { return feature + "=<unknown>"; }

}  // namespace

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

std::string to_string(FeatureKind kind) {
  return kind == FeatureKind::Numeric ? "numeric" : "categorical";
}

FeatureKind feature_kind_from_string(const std::string& text) {
  if (text == "numeric") return FeatureKind::Numeric;
  if (text == "categorical") return FeatureKind::Categorical;
  throw SchemaError("unknown feature kind '" + text + "'");
}

void DatasetSchema::validate() const {
  if (target.empty()) throw SchemaError("schema has no target column");
  if (features.empty()) throw SchemaError("schema lists no features");
  std::set<std::string> names;
  for (const auto& f : features) {
    if (f.name.empty()) throw SchemaError("feature with empty name");
    if (!names.insert(f.name).second) throw SchemaError("duplicate feature '" + f.name + "'");
    if (f.kind == FeatureKind::Categorical && (f.lower || f.upper)) {
      throw SchemaError("categorical feature '" + f.name + "' cannot carry bounds");
    }
    if (f.lower && f.upper && *f.lower > *f.upper) {
      throw SchemaError("feature '" + f.name + "' has lower bound above upper bound");
    }
  }
  if (names.count(target)) throw SchemaError("target '" + target + "' is also listed as a feature");
  for (const auto& id : ids) {
    if (names.count(id)) throw SchemaError("id column '" + id + "' is also listed as a feature");
    if (id == target) throw SchemaError("id column '" + id + "' is the target");
  }
  if (!(clip_lower >= 0.0 && clip_lower < clip_upper && clip_upper <= 1.0)) {
    throw SchemaError("clip quantiles must satisfy 0 <= lower < upper <= 1");
  }
}

const FeatureSpec* DatasetSchema::find(const std::string& name) const {
  for (const auto& f : features) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::optional<std::size_t> DatasetSchema::sensitive_feature() const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].sensitive) return i;
  }
  return std::nullopt;
}

ojson DatasetSchema::to_json() const {
  ojson j;
  ojson feats = ojson::array();
  for (const auto& f : features) {
    ojson fj;
    fj["name"] = f.name;
    fj["kind"] = tabguard::to_string(f.kind);
    if (f.lower) fj["lower"] = *f.lower;
    if (f.upper) fj["upper"] = *f.upper;
    fj["immutable"] = f.immutable;
    fj["sensitive"] = f.sensitive;
    feats.push_back(std::move(fj));
  }
  j["features"] = std::move(feats);
  j["target"] = target;
  j["positive_label"] = positive_label;
  j["ids"] = ids;
  j["clip"] = {{"enabled", clip_enabled}, {"lower", clip_lower}, {"upper", clip_upper}};
  return j;
}

DatasetSchema DatasetSchema::from_json(const json& j) {
  DatasetSchema s;
  try {
    for (const auto& fj : j.at("features")) {
      FeatureSpec f;
      f.name = fj.at("name").get<std::string>();
      f.kind = feature_kind_from_string(fj.value("kind", std::string("numeric")));
      if (fj.contains("lower") && !fj["lower"].is_null()) f.lower = fj["lower"].get<double>();
      if (fj.contains("upper") && !fj["upper"].is_null()) f.upper = fj["upper"].get<double>();
      f.immutable = fj.value("immutable", false);
      f.sensitive = fj.value("sensitive", false);
      s.features.push_back(std::move(f));
    }
    s.target = j.at("target").get<std::string>();
    if (j.contains("positive_label")) {
      const auto& pl = j["positive_label"];
      if (pl.is_string()) {
        s.positive_label = pl.get<std::string>();
      } else if (pl.is_number_integer()) {
        s.positive_label = std::to_string(pl.get<long long>());
      } else if (pl.is_number()) {
        s.positive_label = format_double(pl.get<double>());
      } else if (pl.is_boolean()) {
        s.positive_label = pl.get<bool>() ? "true" : "false";
      }
    }
    if (j.contains("ids")) s.ids = j["ids"].get<std::vector<std::string>>();
    if (j.contains("clip")) {
      const auto& c = j["clip"];
      s.clip_enabled = c.value("enabled", true);
      s.clip_lower = c.value("lower", 0.01);
      s.clip_upper = c.value("upper", 0.99);
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed schema JSON: ") + e.what());
  }
  s.validate();
  return s;
}

std::string DatasetSchema::fingerprint() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

DatasetSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema file " + path.string());
  try {
    return DatasetSchema::from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw SchemaError("schema file " + path.string() + " is not valid JSON: " + e.what());
  }
}

void save_schema(const DatasetSchema& schema, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write schema file " + path.string());
  out << schema.to_json().dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// RawTable
// ---------------------------------------------------------------------------

std::size_t RawTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw SchemaError("missing column '" + name + "'");
}

bool RawTable::has_column(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

const std::vector<Cell>& RawTable::column(const std::string& name) const {
  return cells[column_index(name)];
}

std::vector<Cell>& RawTable::column(const std::string& name) { return cells[column_index(name)]; }

RawTable RawTable::select_rows(std::span<const std::size_t> row_ids) const {
  RawTable out;
  out.columns = columns;
  out.target_normalized = target_normalized;
  out.rows = row_ids.size();
  out.cells.resize(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    out.cells[c].reserve(row_ids.size());
    for (std::size_t r : row_ids) out.cells[c].push_back(cells[c].at(r));
  }
  return out;
}

Labels RawTable::labels(const DatasetSchema& schema) const {
  if (!target_normalized) throw LabelError("target column has not been normalized");
  const auto& col = column(schema.target);
  Labels y(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto* d = std::get_if<double>(&col[i]);
    if (!d) throw LabelError("non-numeric normalized target at row " + std::to_string(i));
    y[i] = *d > 0.5 ? 1 : 0;
  }
  return y;
}

std::vector<double> RawTable::numeric_column(const std::string& name, double fallback) const {
  const auto& col = column(name);
  std::vector<double> out(rows, fallback);
  for (std::size_t i = 0; i < rows; ++i) {
    if (const auto* d = std::get_if<double>(&col[i])) out[i] = *d;
  }
  return out;
}

std::vector<std::string> RawTable::string_column(const std::string& name) const {
  const auto& col = column(name);
  std::vector<std::string> out(rows);
  for (std::size_t i = 0; i < rows; ++i) out[i] = cell_text(col[i]);
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

RawTable parse_csv(const std::string& text, const DatasetSchema& schema,
                   std::span<const std::string> aux_columns) {
  schema.validate();
  const auto records = parse_records(text);
  if (records.empty()) throw DataError("CSV is empty (no header row)");
  const auto& header = records.front();
  if (records.size() < 2) throw DataError("CSV has a header but no data rows");

  auto header_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw SchemaError("missing column '" + name + "'");
  };

  enum class Role { NumericFeature, CategoricalFeature, Target, Id, Aux };
  struct Wanted {
    std::string name;
    Role role;
    std::size_t source;
  };
  std::vector<Wanted> wanted;
  for (const auto& f : schema.features) {
    wanted.push_back({f.name,
                      f.kind == FeatureKind::Numeric ? Role::NumericFeature : Role::CategoricalFeature,
                      header_index(f.name)});
  }
  wanted.push_back({schema.target, Role::Target, header_index(schema.target)});
  for (const auto& id : schema.ids) wanted.push_back({id, Role::Id, header_index(id)});
  for (const auto& aux : aux_columns) {
    if (std::none_of(wanted.begin(), wanted.end(), [&](const Wanted& w) { return w.name == aux; })) {
      wanted.push_back({aux, Role::Aux, header_index(aux)});
    }
  }

  RawTable table;
  table.rows = records.size() - 1;
  for (const auto& w : wanted) table.columns.push_back(w.name);
  table.cells.assign(wanted.size(), std::vector<Cell>(table.rows));

  std::set<std::string> target_values;
  for (std::size_t r = 0; r < table.rows; ++r) {
    const auto& rec = records[r + 1];
    if (rec.size() != header.size()) {
      throw DataError("row " + std::to_string(r + 1) + " has " + std::to_string(rec.size()) +
                      " fields, header has " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < wanted.size(); ++c) {
      const std::string& raw = rec[wanted[c].source];
      Cell& cell = table.cells[c][r];
      switch (wanted[c].role) {
        case Role::NumericFeature:
        case Role::Aux: {
          if (is_missing_token(raw)) break;
          const auto v = parse_number(raw);
          if (!v) {
            throw DataError("non-numeric value '" + raw + "' in numeric column '" + wanted[c].name +
                            "' at row " + std::to_string(r + 1));
          }
          cell = *v;
          break;
        }
        case Role::CategoricalFeature:
          if (!is_missing_token(raw)) cell = raw;
          break;
        case Role::Id:
          cell = raw;
          break;
        case Role::Target:
          if (is_missing_token(raw)) {
            throw DataError("missing target value at row " + std::to_string(r + 1));
          }
          cell = raw;
          target_values.insert(raw);
          break;
      }
    }
  }
  if (target_values.size() > 2) {
    throw LabelError("target '" + schema.target + "' has " + std::to_string(target_values.size()) +
                     " distinct values; a binary target is required");
  }
  return table;
}

RawTable load_csv(const std::filesystem::path& path, const DatasetSchema& schema,
                  std::span<const std::string> aux_columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open CSV file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema, aux_columns);
}

std::string to_csv(const RawTable& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out.push_back(',');
    out += csv_escape(table.columns[c]);
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < table.rows; ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (c) out.push_back(',');
      out += csv_escape(cell_text(table.cells[c][r]));
    }
    out.push_back('\n');
  }
  return out;
}

void write_csv(const RawTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write CSV file " + path.string());
  out << to_csv(table);
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

RawTable normalize_target(const RawTable& raw, const DatasetSchema& schema) {
  if (raw.target_normalized) return raw;
  RawTable out = raw;
  auto& col = out.column(schema.target);
  std::set<std::string> distinct;
  bool positive_seen = false;
  for (auto& cell : col) {
    const std::string text = cell_text(cell);
    if (text.empty()) throw DataError("missing target value");
    distinct.insert(text);
    const bool pos = labels_match(text, schema.positive_label);
    positive_seen = positive_seen || pos;
    cell = pos ? 1.0 : 0.0;
  }
  if (distinct.size() > 2) throw LabelError("target has more than two distinct values");
  if (distinct.size() == 2 && !positive_seen) {
    throw LabelError("positive label '" + schema.positive_label + "' not present in target '" +
                     schema.target + "'");
  }
  out.target_normalized = true;
  return out;
}

double clip_percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DataError("percentile of an empty column");
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  return sorted[static_cast<std::size_t>(std::llround(pos))];
}

CleaningStats fit_cleaning(const RawTable& raw, const DatasetSchema& schema) {
  CleaningStats stats;
  for (const auto& f : schema.features) {
    const auto& col = raw.column(f.name);
    if (f.kind == FeatureKind::Numeric) {
      const auto values = sorted_present(col);
      if (values.empty()) throw DataError("column '" + f.name + "' has no non-missing values");
      NumericCleaning nc;
      nc.median = median_sorted(values);
      nc.clip_lo = clip_percentile(values, schema.clip_lower);
      nc.clip_hi = clip_percentile(values, schema.clip_upper);
      stats.numeric[f.name] = nc;
    } else {
      std::map<std::string, std::size_t> counts;
      for (const Cell& c : col) {
        if (const auto* s = std::get_if<std::string>(&c)) ++counts[*s];
      }
      if (counts.empty()) throw DataError("column '" + f.name + "' has no non-missing values");
      // Most frequent; ties resolve to the lexicographically smallest category.
      auto best = counts.begin();
      for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) best = it;
      }
      stats.categorical_mode[f.name] = best->first;
    }
  }
  return stats;
}

RawTable apply_cleaning(const RawTable& raw, const DatasetSchema& schema,
                        const CleaningStats& stats) {
  RawTable out = normalize_target(raw, schema);
  for (const auto& f : schema.features) {
    auto& col = out.column(f.name);
    if (f.kind == FeatureKind::Numeric) {
      const auto it = stats.numeric.find(f.name);
      if (it == stats.numeric.end()) throw DataError("no cleaning statistics for '" + f.name + "'");
      const NumericCleaning& nc = it->second;
      for (Cell& c : col) {
        double v = is_missing(c) ? nc.median : std::get<double>(c);
        if (schema.clip_enabled) v = std::clamp(v, nc.clip_lo, nc.clip_hi);
        c = v;
      }
    } else {
      const auto it = stats.categorical_mode.find(f.name);
      if (it == stats.categorical_mode.end()) {
        throw DataError("no cleaning statistics for '" + f.name + "'");
      }
      for (Cell& c : col) {
        if (is_missing(c)) c = it->second;
      }
    }
  }
  return out;
}

RawTable clean(const RawTable& raw, const DatasetSchema& schema) {
  return apply_cleaning(raw, schema, fit_cleaning(raw, schema));
}

ojson CleaningStats::to_json() const {
  ojson j;
  ojson num = ojson::object();
  for (const auto& [name, nc] : numeric) {
    num[name] = {{"median", nc.median}, {"clip_lo", nc.clip_lo}, {"clip_hi", nc.clip_hi}};
  }
  j["numeric"] = std::move(num);
  ojson modes = ojson::object();
  for (const auto& [name, mode] : categorical_mode) modes[name] = mode;
  j["categorical_mode"] = std::move(modes);
  return j;
}

CleaningStats CleaningStats::from_json(const json& j) {
  CleaningStats s;
  for (const auto& [name, v] : j.at("numeric").items()) {
    s.numeric[name] = {v.at("median").get<double>(), v.at("clip_lo").get<double>(),
                       v.at("clip_hi").get<double>()};
  }
  for (const auto& [name, v] : j.at("categorical_mode").items()) {
    s.categorical_mode[name] = v.get<std::string>();
  }
  return s;
}

// ---------------------------------------------------------------------------
// Preprocessor
// ---------------------------------------------------------------------------

std::size_t CategoryMap::index_of(const std::string& value) const {
  const auto it = std::lower_bound(categories.begin(), categories.end(), value);
  if (it != categories.end() && *it == value) {
    return static_cast<std::size_t>(it - categories.begin());
  }
  return categories.size();
}

namespace {

std::vector<ColumnInfo> build_columns(const std::vector<std::string>& features,
                                      const std::vector<NumericScaler>& scalers,
                                      const std::vector<CategoryMap>& maps) {
  std::vector<ColumnInfo> cols;
  for (const auto& name : features) {
    const auto s = std::find_if(scalers.begin(), scalers.end(),
                                [&](const NumericScaler& x) { return x.feature == name; });
    if (s != scalers.end()) {
      cols.push_back({name, FeatureKind::Numeric, "", false});
      continue;
    }
    const auto m = std::find_if(maps.begin(), maps.end(),
                                [&](const CategoryMap& x) { return x.feature == name; });
    if (m == maps.end()) throw FormatError("preprocessor has no statistics for '" + name + "'");
    for (const auto& cat : m->categories) cols.push_back({name, FeatureKind::Categorical, cat, false});
    cols.push_back({name, FeatureKind::Categorical, "", true});
  }
  return cols;
}

}  // namespace

Preprocessor fit_preprocessor(const RawTable& train_rows, const DatasetSchema& schema,
                              const CleaningStats* cleaning) {
  schema.validate();
  Preprocessor p;
  p.cleaning_ = cleaning ? *cleaning : fit_cleaning(train_rows, schema);
  const RawTable rows = apply_cleaning(train_rows, schema, p.cleaning_);
  for (const auto& f : schema.features) {
    const auto& col = rows.column(f.name);
    if (f.kind == FeatureKind::Numeric) {
      double sum = 0.0;
      for (const Cell& c : col) sum += std::get<double>(c);
      const double mean = sum / static_cast<double>(rows.rows);
      double ss = 0.0;
      for (const Cell& c : col) {
        const double d = std::get<double>(c) - mean;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / static_cast<double>(rows.rows));
      if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        p.dropped_.push_back(f.name);
        p.warnings_.push_back("numeric feature '" + f.name +
                              "' has zero variance on the training split and was dropped");
        continue;
      }
      p.scalers_.push_back({f.name, mean, sd});
    } else {
      std::set<std::string> cats;
      for (const Cell& c : col) cats.insert(std::get<std::string>(c));
      p.category_maps_.push_back({f.name, std::vector<std::string>(cats.begin(), cats.end())});
    }
    p.features_.push_back(f.name);
  }
  if (p.features_.empty()) throw DataError("no usable features remain after preprocessing");
  p.columns_ = build_columns(p.features_, p.scalers_, p.category_maps_);
  return p;
}

std::vector<std::string> Preprocessor::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns_.size());
  for (const auto& c : columns_) {
    if (c.kind == FeatureKind::Numeric) {
      names.push_back(c.feature);
    } else if (c.unknown_bucket) {
      names.push_back(unknown_name(c.feature));
    } else {
      names.push_back(c.feature + "=" + c.category);
    }
  }
  return names;
}

std::vector<std::vector<std::size_t>> Preprocessor::feature_groups() const {
  std::vector<std::vector<std::size_t>> groups;
  groups.reserve(features_.size());
  for (const auto& f : features_) groups.push_back(columns_of(f));
  return groups;
}

std::vector<std::size_t> Preprocessor::columns_of(const std::string& feature) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].feature == feature) out.push_back(i);
  }
  return out;
}

const NumericScaler* Preprocessor::scaler(const std::string& feature) const {
  for (const auto& s : scalers_) {
    if (s.feature == feature) return &s;
  }
  return nullptr;
}

Encoded Preprocessor::transform(const RawTable& rows, const DatasetSchema& schema) const {
  const RawTable cleaned = apply_cleaning(rows, schema, cleaning_);
  Encoded enc;
  enc.X = Matrix::Zero(static_cast<Eigen::Index>(cleaned.rows), static_cast<Eigen::Index>(dimension()));
  std::size_t col = 0;
  for (const auto& name : features_) {
    const auto& cells = cleaned.column(name);
    if (const NumericScaler* s = scaler(name)) {
      for (std::size_t r = 0; r < cleaned.rows; ++r) {
        enc.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) =
            (std::get<double>(cells[r]) - s->mean) / s->std;
      }
      ++col;
      continue;
    }
    const auto& map = *std::find_if(category_maps_.begin(), category_maps_.end(),
                                    [&](const CategoryMap& m) { return m.feature == name; });
    for (std::size_t r = 0; r < cleaned.rows; ++r) {
      const std::size_t k = map.index_of(std::get<std::string>(cells[r]));
      enc.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col + k)) = 1.0;
    }
    col += map.categories.size() + 1;
  }
  enc.y = cleaned.labels(schema);
  return enc;
}

Matrix Preprocessor::inverse_transform(const Matrix& X) const {
  if (static_cast<std::size_t>(X.cols()) != dimension()) {
    throw ShapeError("inverse_transform: matrix has " + std::to_string(X.cols()) +
                     " columns, preprocessor expects " + std::to_string(dimension()));
  }
  Matrix out = X;
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (columns_[c].kind != FeatureKind::Numeric) continue;
    const NumericScaler* s = scaler(columns_[c].feature);
    out.col(static_cast<Eigen::Index>(c)) =
        (X.col(static_cast<Eigen::Index>(c)).array() * s->std + s->mean).matrix();
  }
  return out;
}

std::vector<std::string> Preprocessor::decode_row(
    const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  std::vector<std::string> out;
  for (const auto& name : features_) {
    const auto cols = columns_of(name);
    if (const NumericScaler* s = scaler(name)) {
      out.push_back(format_sig(row(static_cast<Eigen::Index>(cols[0])) * s->std + s->mean, 6));
      continue;
    }
    std::size_t best = cols[0];
    for (std::size_t c : cols) {
      if (row(static_cast<Eigen::Index>(c)) > row(static_cast<Eigen::Index>(best))) best = c;
    }
    out.push_back(columns_[best].unknown_bucket ? "<unknown>" : columns_[best].category);
  }
  return out;
}

ojson Preprocessor::to_json() const {
  ojson j;
  j["std_convention"] = "population";
  j["features"] = features_;
  ojson sc = ojson::array();
  for (const auto& s : scalers_) sc.push_back({{"feature", s.feature}, {"mean", s.mean}, {"std", s.std}});
  j["scalers"] = std::move(sc);
  ojson maps = ojson::array();
  for (const auto& m : category_maps_) {
    maps.push_back({{"feature", m.feature}, {"categories", m.categories}});
  }
  j["category_maps"] = std::move(maps);
  j["cleaning"] = cleaning_.to_json();
  j["dropped"] = dropped_;
  j["warnings"] = warnings_;
  return j;
}

Preprocessor Preprocessor::from_json(const json& j) {
  Preprocessor p;
  try {
    p.features_ = j.at("features").get<std::vector<std::string>>();
    for (const auto& s : j.at("scalers")) {
      p.scalers_.push_back({s.at("feature").get<std::string>(), s.at("mean").get<double>(),
                            s.at("std").get<double>()});
    }
    for (const auto& m : j.at("category_maps")) {
      p.category_maps_.push_back(
          {m.at("feature").get<std::string>(), m.at("categories").get<std::vector<std::string>>()});
    }
    p.cleaning_ = CleaningStats::from_json(j.at("cleaning"));
    p.dropped_ = j.at("dropped").get<std::vector<std::string>>();
    p.warnings_ = j.at("warnings").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed preprocessor state: ") + e.what());
  }
  p.columns_ = build_columns(p.features_, p.scalers_, p.category_maps_);
  return p;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

Splits stratified_split(std::span<const int> labels, std::array<double, 3> ratios,
                        std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9 || ratios[0] <= 0.0 || ratios[1] < 0.0 || ratios[2] < 0.0) {
    throw ParamError("split ratios must be non-negative, train > 0, and sum to 1");
  }
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw LabelError("labels must be 0 or 1");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  Splits out;
  out.ratios = ratios;
  out.seed = seed;
  for (int cls = 0; cls < 2; ++cls) {
    auto& members = by_class[static_cast<std::size_t>(cls)];
    if (members.size() < 3) {
      throw DataError("class " + std::to_string(cls) + " has " + std::to_string(members.size()) +
                      " members; stratified splitting needs at least 3");
    }
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cls)));
    rng.shuffle(members);
    const double n = static_cast<double>(members.size());
    auto take = [&](double r) {
      if (r <= 0.0) return std::size_t{0};
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(r * n)));
    };
    const std::size_t n_val = take(ratios[1]);
    const std::size_t n_test = take(ratios[2]);
    const std::size_t n_train = members.size() - n_val - n_test;
    out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<long>(n_train));
    out.validation.insert(out.validation.end(), members.begin() + static_cast<long>(n_train),
                          members.begin() + static_cast<long>(n_train + n_val));
    out.test.insert(out.test.end(), members.begin() + static_cast<long>(n_train + n_val),
                    members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic credit data
// ---------------------------------------------------------------------------

namespace {

struct NumericArchetype {
  const char* name;
  std::optional<double> lower;
  std::optional<double> upper;
};

constexpr NumericArchetype kNumeric[] = {
    {"income", 0.0, std::nullopt},
    {"utilization", 0.0, 1.0},
    {"age", 18.0, 100.0},
    {"delinquencies", 0.0, std::nullopt},
    {"bureau_score", 300.0, 850.0},
};

// Observed value as a monotone function of the latent standard normal.
double observe(std::size_t archetype, double z) {
  switch (archetype) {
    case 0: return std::round(std::exp(10.5 + 0.5 * z));
    case 1: return sigmoid(1.2 * z);
    case 2: return std::clamp(std::round(45.0 + 12.0 * z), 18.0, 100.0);
    case 3: return std::floor(std::exp(0.9 * z));
    default: return std::clamp(std::round(650.0 + 70.0 * z), 300.0, 850.0);
  }
}

struct CategoricalArchetype {
  const char* name;
  std::vector<std::string> levels;
};

const std::vector<CategoricalArchetype>& categorical_archetypes() {
  static const std::vector<CategoricalArchetype> kinds = {
      {"region", {"central", "east", "north", "south", "west"}},
      {"group", {"A", "B"}},
      {"channel", {"branch", "broker", "online"}},
      {"product", {"card", "mortgage", "personal", "auto"}},
      {"housing", {"own", "rent", "other"}},
  };
  return kinds;
}

}  // namespace

SyntheticDataset generate_synthetic_credit(std::size_t n, std::size_t d_numeric,
                                           std::size_t d_categorical, double default_rate,
                                           std::uint64_t seed) {
  if (n < 100) throw ParamError("synthetic dataset needs n >= 100");
  if (!(default_rate > 0.0 && default_rate < 0.5)) {
    throw ParamError("default_rate must lie in (0, 0.5)");
  }
  if (d_numeric == 0) throw ParamError("synthetic dataset needs at least one numeric feature");
  if (d_categorical == 0) throw ParamError("synthetic dataset needs at least one categorical feature");

  Rng coef_rng(derive_seed(seed, "coefficients"));
  Rng row_rng(derive_seed(seed, "rows"));
  Rng label_rng(derive_seed(seed, "labels"));
  Rng missing_rng(derive_seed(seed, "missing"));

  SyntheticDataset out;
  DatasetSchema& schema = out.schema;
  schema.target = "default";
  schema.ids = {"id"};
  schema.positive_label = "1";

  // Ground-truth logit: a fixed-norm random linear combination of the latent
  // numeric factors plus per-level categorical effects and Gaussian noise.
  std::vector<double> weights(d_numeric);
  double norm = 0.0;
  for (double& w : weights) {
    w = coef_rng.normal();
    norm += w * w;
  }
  norm = std::sqrt(norm);
  for (double& w : weights) w *= 1.3 / norm;

  const auto& cat_kinds = categorical_archetypes();
  std::vector<std::vector<double>> level_effects(d_categorical);
  for (std::size_t k = 0; k < d_categorical; ++k) {
    const auto& levels = cat_kinds[k % cat_kinds.size()].levels;
    for (std::size_t l = 0; l < levels.size(); ++l) level_effects[k].push_back(0.35 * coef_rng.normal());
  }

  for (std::size_t j = 0; j < d_numeric; ++j) {
    const auto& a = kNumeric[j % std::size(kNumeric)];
    FeatureSpec f;
    f.name = std::string(a.name) + "_" + std::to_string(j);
    f.lower = a.lower;
    f.upper = a.upper;
    schema.features.push_back(f);
  }
  const std::size_t sensitive = d_categorical >= 2 ? 1 : 0;
  for (std::size_t k = 0; k < d_categorical; ++k) {
    FeatureSpec f;
    f.kind = FeatureKind::Categorical;
    f.name = cat_kinds[k % cat_kinds.size()].name;
    if (k >= cat_kinds.size()) f.name += "_" + std::to_string(k);
    f.immutable = (k == 0);
    f.sensitive = (k == sensitive);
    schema.features.push_back(f);
  }

  RawTable& t = out.table;
  t.rows = n;
  t.columns.push_back("id");
  for (const auto& f : schema.features) t.columns.push_back(f.name);
  t.columns.push_back(schema.target);
  t.cells.assign(t.columns.size(), std::vector<Cell>(n));

  std::vector<double> linear(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    t.cells[0][i] = std::to_string(i);
    for (std::size_t j = 0; j < d_numeric; ++j) {
      const double z = row_rng.normal();
      linear[i] += weights[j] * z;
      t.cells[1 + j][i] = observe(j % std::size(kNumeric), z);
    }
    for (std::size_t k = 0; k < d_categorical; ++k) {
      const auto& levels = cat_kinds[k % cat_kinds.size()].levels;
      const std::size_t l = row_rng.index(levels.size());
      linear[i] += level_effects[k][l];
      t.cells[1 + d_numeric + k][i] = levels[l];
    }
    linear[i] += 0.3 * row_rng.normal();
  }

  // Intercept such that the mean default probability equals default_rate.
  auto mean_pd = [&](double b) {
    double s = 0.0;
    for (double v : linear) s += sigmoid(b + v);
    return s / static_cast<double>(n);
  };
  double lo = -30.0, hi = 30.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_pd(mid) < default_rate ? lo : hi) = mid;
  }
  const double intercept = 0.5 * (lo + hi);

  auto& target = t.cells.back();
  for (std::size_t i = 0; i < n; ++i) {
    target[i] = std::string(label_rng.bernoulli(sigmoid(intercept + linear[i])) ? "1" : "0");
  }

  // Sparse missingness exercises the imputation path.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d_numeric + d_categorical; ++j) {
      const double rate = j < d_numeric ? 0.01 : 0.005;
      if (missing_rng.bernoulli(rate)) t.cells[1 + j][i] = std::monostate{};
    }
  }
  return out;
}

}  // namespace tabguard
