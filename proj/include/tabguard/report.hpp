#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabguard/driftfair.hpp"
#include "tabguard/econrisk.hpp"
#include "tabguard/explain.hpp"
#include "tabguard/metrics.hpp"
#include "tabguard/semantic.hpp"
#include "tabguard/stats.hpp"

namespace tabguard {

inline const std::vector<std::string> kScenarios{"clean", "fgsm", "pgd"};

struct DiscriminationBlock {
  double auroc = 0.0, ks = 0.0, gini = 0.0, accuracy = 0.0;
};

struct CalibrationBlock {
  double ece = 0.0, brier = 0.0;
  ReliabilityBins reliability;
};

struct EconomicBlock {
  double expected_loss = 0.0;
  double var = 0.0;
  double es = 0.0;
  double alpha = 0.95;
  std::size_t n_sims = 0;
  double loss_mean = 0.0;  // simulated
  double loss_std = 0.0;
  CostSpec cost;
  CostCurve cost_curve;
  double bayes_tau = 0.0;
  EconomicConfusion confusion;  // at the Bayes threshold
};

/// All metric suites for one evaluation scenario.
struct ScenarioBlock {
  std::string scenario;
  std::size_t n = 0;
  std::size_t positives = 0;
  DiscriminationBlock discrimination;
  CalibrationBlock calibration;
  EconomicBlock economic;
  std::optional<DriftReport> drift;  // against the clean scenario; absent for clean itself
  std::optional<FairnessReport> fairness;
  std::string fairness_null_reason;
  std::vector<CapPoint> cap;
};

struct StabilityBlock {
  std::string scenario;  // the adversarial side of the comparison
  StabilityStats stats;
  std::vector<std::string> feature_names;
  std::vector<std::string> row_ids;  // aligned with stats.rows
};

struct SriBlock {
  std::string scenario;
  SriResult result;
  std::string provider_note;  // e.g. fallback reason
};

struct BootstrapEntry {
  std::string metric;      // auroc, el, var, es
  std::string scenario_a;  // clean
  std::string scenario_b;  // pgd
  PairedBootstrap ci;
};

struct SweepRow {
  double epsilon = 0.0;
  double pgd_auroc = 0.0;
  double pgd_el = 0.0;
  std::optional<double> shap_cosine;
  std::optional<double> sri;
};

struct ComparisonRow {
  std::string model;
  double clean_auroc = 0.0;
  double pgd_auroc = 0.0;
  double pgd_ece = 0.0;
  double pgd_el = 0.0;
};

/// Everything a report can hold. Blocks left empty become null with a reason.
struct ReportInputs {
  nlohmann::ordered_json metadata;  // seeds, configs, fingerprints
  std::vector<std::string> warnings;
  std::string model_name;
  std::string training_mode;
  std::vector<ScenarioBlock> scenarios;  // must include "clean"
  std::map<std::string, std::string> skipped_reasons;  // block name -> reason, for disabled blocks
  std::vector<StabilityBlock> shap;
  std::vector<SriBlock> semantic;
  std::vector<BootstrapEntry> bootstrap;
  std::vector<SweepRow> sweep;
  std::vector<ComparisonRow> comparison;
};

/// Deterministic report document. Non-finite numbers become null and every
/// null carries a reason under "null_reasons", keyed by JSON pointer.
nlohmann::ordered_json assemble(const ReportInputs& in);

void emit_json(const nlohmann::ordered_json& report, const std::filesystem::path& path);
nlohmann::ordered_json load_report(const std::filesystem::path& path);

/// Writes every table listed in report_csv_files() into dir. Tables are
/// derived from the JSON document alone, so a reloaded report regenerates
/// identical files.
void emit_csv(const nlohmann::ordered_json& report, const std::filesystem::path& dir);
const std::vector<std::string>& report_csv_files();

/// Individual tables, as text.
std::string discrimination_csv(const nlohmann::ordered_json& report);
std::string epsilon_sweep_csv(const nlohmann::ordered_json& report);
std::string comparison_csv(const nlohmann::ordered_json& report);

/// ISO-8601 UTC time from SOURCE_DATE_EPOCH, or nullopt when unset.
std::optional<std::string> reproducible_timestamp();

/// Writes text to a file, surfacing failures as IoError with the path.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace tabguard
