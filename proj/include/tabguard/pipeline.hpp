#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabguard/attacks.hpp"
#include "tabguard/dataio.hpp"
#include "tabguard/defense.hpp"
#include "tabguard/econrisk.hpp"
#include "tabguard/explain.hpp"
#include "tabguard/nn.hpp"
#include "tabguard/report.hpp"
#include "tabguard/semantic.hpp"
#include "tabguard/stats.hpp"

namespace tabguard {

struct SynthConfig {
  std::size_t n = 5000;
  std::size_t d_numeric = 15;
  std::size_t d_categorical = 5;
  double default_rate = 0.2;
  std::uint64_t seed = 42;
};

struct ExplainConfig {
  std::size_t n_instances = 200;
  std::size_t n_coalitions = 512;
  std::size_t background_size = 50;
  std::size_t sweep_instances = 50;
  std::uint64_t seed = 0;
};

/// The unified configuration. Every block is optional in the JSON form; stage
/// seeds not given explicitly are derived from the master seed by label.
struct RunConfig {
  std::uint64_t master_seed = 42;
  std::optional<std::filesystem::path> data_csv;
  std::optional<std::filesystem::path> schema_path;
  std::optional<std::filesystem::path> checkpoint;
  SynthConfig synth;
  std::array<double, 3> split_ratios{0.6, 0.2, 0.2};
  std::uint64_t split_seed = 0;
  TrainConfig train;
  AttackConfig attack;
  DefenseConfig defense;
  EconConfig econ;
  std::size_t econ_bootstrap_sims = 1000;
  double fairness_tau = 0.5;
  std::size_t drift_bins = 10;
  std::size_t ece_bins = 10;
  ExplainConfig explain;
  SemanticConfig semantic;
  BootstrapConfig stats;
  std::vector<double> sweep_epsilons{0.0, 0.01, 0.05, 0.10};

  static RunConfig from_json(const nlohmann::json& j, std::optional<std::uint64_t> seed_override = std::nullopt);
  static RunConfig defaults(std::uint64_t master_seed = 42);
  nlohmann::ordered_json to_json() const;
};

RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          std::optional<std::uint64_t> seed_override = std::nullopt);

/// Structured log record: stage, message and optional fields.
using PipelineLog = std::function<void(const std::string& stage, const std::string& message,
                                       const nlohmann::ordered_json& fields)>;

struct PreparedData {
  DatasetSchema schema;
  RawTable raw;  // target normalized
  Splits splits;
  Preprocessor pre;
  Encoded train;
  Encoded validation;
  Encoded test;
  std::vector<std::string> test_ids;
  std::vector<std::string> test_groups;  // sensitive feature (cleaned), empty if none
  std::string sensitive_feature;
  ExposureBook test_book;
  std::vector<std::string> warnings;
};

/// Loads (or synthesizes) the data, splits it and fits the preprocessor on
/// the training split. With `fitted`, that preprocessor is used instead.
PreparedData prepare_data(const RunConfig& cfg, const Preprocessor* fitted = nullptr);

enum class TrainingMode { Baseline, PgdAdversarial, Noise };
std::string to_string(TrainingMode mode);
TrainingMode training_mode_from_string(const std::string& text);

MlpCheckpoint train_model(const RunConfig& cfg, const PreparedData& data, TrainingMode mode);

struct EvaluateOptions {
  std::set<std::string> scenarios{"clean", "fgsm", "pgd"};
  bool shap = true;
  bool semantic = true;
  bool bootstrap = true;
  bool sweep = false;
  std::size_t threads = 0;
};

/// Scores one scenario with every metric suite.
ScenarioBlock score_scenario(const std::string& name, const Vector& scores, const Labels& y, const RunConfig& cfg,
                             const PreparedData& data, const Matrix* X, const Matrix* X_clean,
                             const Vector* clean_scores);

struct Evaluation {
  ReportInputs inputs;
  std::map<std::string, Matrix> adversarial;  // scenario -> perturbed test matrix
  std::map<std::string, Vector> scores;
};

Evaluation evaluate(const RunConfig& cfg, const MlpCheckpoint& ckpt, const PreparedData& data,
                    const EvaluateOptions& opts, const PipelineLog& log = {});

/// PGD at each budget. The list must contain 0; duplicates are dropped with a warning.
std::vector<SweepRow> epsilon_sweep(const RunConfig& cfg, const MlpCheckpoint& ckpt, const PreparedData& data,
                                    std::vector<double> epsilons, bool shap, bool semantic,
                                    std::vector<std::string>* warnings, const PipelineLog& log = {});

std::vector<ComparisonRow> defend_compare(const RunConfig& cfg, const PreparedData& data,
                                          std::vector<MlpCheckpoint>* models, const PipelineLog& log = {});

/// Run metadata shared by every artifact: seeds, configuration and fingerprints.
nlohmann::ordered_json run_metadata(const RunConfig& cfg, const PreparedData& data, const MlpCheckpoint* ckpt);

}  // namespace tabguard
