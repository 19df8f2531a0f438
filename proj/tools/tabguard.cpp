#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tabguard/pipeline.hpp"

namespace fs = std::filesystem;
using namespace tabguard;
using ojson = nlohmann::ordered_json;

namespace {

struct Options {
  std::optional<std::string> config;
  std::string out = "tabguard_out";
  std::optional<std::uint64_t> seed;
  std::string scenario = "all";
  bool no_shap = false;
  bool no_semantic = false;
  bool no_bootstrap = false;
  std::string mode = "baseline";
  std::vector<double> epsilons;
  std::size_t threads = 0;
};

void log_line(const std::string& stage, const std::string& msg, const ojson& fields) {
  ojson line{{"stage", stage}, {"msg", msg}};
  for (const auto& [k, v] : fields.items()) line[k] = v;
  static std::mutex mu;  // live semantic calls log from worker threads
  const std::lock_guard lock(mu);
  std::cerr << line.dump() << '\n';
}

const PipelineLog kLog = log_line;

// Files are produced in a staging directory and moved into place only when
// the whole command succeeds.
class Staging {
 public:
  Staging(const fs::path& out, const std::string& command) : out_(out), dir_(out / (".staging-" + command)) {
    fs::create_directories(out_);
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Staging() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }
  const fs::path& dir() const { return dir_; }

  void commit() {
    for (const auto& entry : fs::directory_iterator(dir_)) {
      const fs::path target = out_ / entry.path().filename();
      fs::remove_all(target);
      fs::rename(entry.path(), target);
    }
  }

 private:
  fs::path out_;
  fs::path dir_;
};

RunConfig resolve_config(const Options& o, bool need_data, bool need_checkpoint) {
  RunConfig cfg = load_run_config(o.config ? std::optional<fs::path>(*o.config) : std::nullopt, o.seed);
  const fs::path out(o.out);
  if (need_data && !cfg.data_csv && fs::exists(out / "data.csv")) {
    cfg.data_csv = out / "data.csv";
    if (!cfg.schema_path) cfg.schema_path = out / "schema.json";
  }
  if (need_checkpoint && !cfg.checkpoint) {
    if (!fs::exists(out / "model.json")) {
      throw IoError("no checkpoint: set \"checkpoint\" in the config or run train with --out " + o.out);
    }
    cfg.checkpoint = out / "model.json";
  }
  return cfg;
}

std::set<std::string> scenario_set(const std::string& s) {
  if (s == "all") return {"clean", "fgsm", "pgd"};
  if (s == "clean" || s == "fgsm" || s == "pgd") return {"clean", s};
  throw ParamError("--scenario must be clean, fgsm, pgd or all");
}

void print_summary(const ojson& j) { std::cout << j.dump() << std::endl; }

int cmd_synth(const Options& o) {
  RunConfig cfg = load_run_config(o.config ? std::optional<fs::path>(*o.config) : std::nullopt, o.seed);
  auto data = generate_synthetic_credit(cfg.synth.n, cfg.synth.d_numeric, cfg.synth.d_categorical,
                                        cfg.synth.default_rate, cfg.synth.seed);
  Staging stage(o.out, "synth");
  write_csv(data.table, stage.dir() / "data.csv");
  save_schema(data.schema, stage.dir() / "schema.json");
  stage.commit();
  log_line("synth", "dataset written", ojson{{"rows", data.table.rows}, {"seed", cfg.synth.seed}});
  print_summary(ojson{{"command", "synth"},
                      {"rows", data.table.rows},
                      {"features", data.schema.features.size()},
                      {"data", (fs::path(o.out) / "data.csv").string()},
                      {"schema", (fs::path(o.out) / "schema.json").string()}});
  return 0;
}

int cmd_train(const Options& o) {
  const RunConfig cfg = resolve_config(o, true, false);
  const TrainingMode mode = training_mode_from_string(o.mode);
  const PreparedData data = prepare_data(cfg, nullptr);
  log_line("train", "data prepared",
           ojson{{"train", data.train.y.size()}, {"validation", data.validation.y.size()}, {"test", data.test.y.size()}});
  const MlpCheckpoint ckpt = train_model(cfg, data, mode);
  Staging stage(o.out, "train");
  save_checkpoint(ckpt, stage.dir() / "model.json");
  stage.commit();
  print_summary(ojson{{"command", "train"},
                      {"mode", to_string(mode)},
                      {"best_epoch", ckpt.best_epoch},
                      {"best_val_auroc", ckpt.best_val_auroc},
                      {"checkpoint", (fs::path(o.out) / "model.json").string()}});
  return 0;
}

int cmd_evaluate(const Options& o) {
  const RunConfig cfg = resolve_config(o, true, true);
  const MlpCheckpoint ckpt = load_checkpoint(*cfg.checkpoint);
  const PreparedData data = prepare_data(cfg, &ckpt.preprocessor);
  EvaluateOptions opts;
  opts.scenarios = scenario_set(o.scenario);
  opts.shap = !o.no_shap;
  opts.semantic = !o.no_semantic;
  opts.bootstrap = !o.no_bootstrap;
  opts.threads = o.threads;
  const Evaluation ev = evaluate(cfg, ckpt, data, opts, kLog);
  const ojson report = assemble(ev.inputs);
  Staging stage(o.out, "evaluate");
  const fs::path dir = stage.dir() / "report";
  fs::create_directories(dir);
  emit_json(report, dir / "report.json");
  emit_csv(report, dir);
  stage.commit();
  ojson summary{{"command", "evaluate"}, {"report", (fs::path(o.out) / "report" / "report.json").string()}};
  for (const auto& [name, block] : report["scenarios"].items()) {
    summary["auroc"][name] = block.is_null() ? ojson(nullptr) : block["discrimination"]["auroc"];
  }
  print_summary(summary);
  return 0;
}

int cmd_sweep(const Options& o) {
  const RunConfig cfg = resolve_config(o, true, true);
  const MlpCheckpoint ckpt = load_checkpoint(*cfg.checkpoint);
  const PreparedData data = prepare_data(cfg, &ckpt.preprocessor);
  std::vector<std::string> warnings = data.warnings;
  const auto eps = o.epsilons.empty() ? cfg.sweep_epsilons : o.epsilons;
  ReportInputs in;
  in.metadata = run_metadata(cfg, data, &ckpt);
  in.model_name = ckpt.training_mode;
  in.training_mode = ckpt.training_mode;
  const Mlp model(ckpt.params);
  in.scenarios.push_back(score_scenario("clean", model.predict_proba(data.test.X), data.test.y, cfg, data, nullptr,
                                       nullptr, nullptr));
  in.sweep = epsilon_sweep(cfg, ckpt, data, eps, !o.no_shap, !o.no_semantic, &warnings, kLog);
  in.warnings = warnings;
  for (const char* key : {"scenario:fgsm", "scenario:pgd"}) in.skipped_reasons[key] = "not_run";
  in.skipped_reasons["shap_stability"] = "not_run";
  in.skipped_reasons["semantic"] = "not_run";
  in.skipped_reasons["bootstrap"] = "not_run";
  in.skipped_reasons["comparison"] = "not_run";
  const ojson report = assemble(in);
  Staging stage(o.out, "sweep");
  const fs::path dir = stage.dir() / "sweep";
  fs::create_directories(dir);
  write_text(dir / "epsilon_sweep.csv", epsilon_sweep_csv(report));
  emit_json(report, dir / "sweep.json");
  stage.commit();
  ojson rows = ojson::array();
  for (const auto& r : in.sweep) rows.push_back(ojson{{"epsilon", r.epsilon}, {"pgd_auroc", r.pgd_auroc}});
  print_summary(ojson{{"command", "sweep"}, {"rows", rows}, {"warnings", warnings}});
  return 0;
}

int cmd_defend_compare(const Options& o) {
  const RunConfig cfg = resolve_config(o, true, false);
  const PreparedData data = prepare_data(cfg, nullptr);
  std::vector<MlpCheckpoint> models;
  ReportInputs in;
  in.metadata = run_metadata(cfg, data, nullptr);
  in.warnings = data.warnings;
  in.model_name = "defend-compare";
  in.training_mode = "mixed";
  in.comparison = defend_compare(cfg, data, &models, kLog);
  const Mlp baseline(models.front().params);
  in.scenarios.push_back(score_scenario("clean", baseline.predict_proba(data.test.X), data.test.y, cfg, data,
                                        nullptr, nullptr, nullptr));
  for (const char* key : {"scenario:fgsm", "scenario:pgd"}) in.skipped_reasons[key] = "not_run";
  for (const char* key : {"shap_stability", "semantic", "bootstrap", "epsilon_sweep"}) in.skipped_reasons[key] = "not_run";
  const ojson report = assemble(in);
  Staging stage(o.out, "compare");
  const fs::path dir = stage.dir() / "compare";
  fs::create_directories(dir);
  write_text(dir / "defense_comparison.csv", comparison_csv(report));
  emit_json(report, dir / "comparison.json");
  for (const auto& m : models) save_checkpoint(m, dir / ("model_" + m.training_mode + ".json"));
  stage.commit();
  ojson rows = ojson::array();
  for (const auto& r : in.comparison) {
    rows.push_back(ojson{{"model", r.model}, {"clean_auroc", r.clean_auroc}, {"pgd_auroc", r.pgd_auroc}});
  }
  print_summary(ojson{{"command", "defend-compare"}, {"rows", rows}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial robustness evaluation for tabular binary classifiers"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run configuration JSON");
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", o.seed, "Master seed (overrides the config)");
    sub->add_option("--threads", o.threads, "Worker threads (0 = hardware)");
  };
  auto* synth = app.add_subcommand("synth", "Generate the synthetic credit dataset");
  auto* train = app.add_subcommand("train", "Train a model");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint under attack");
  auto* sweep = app.add_subcommand("sweep", "PGD epsilon sweep");
  auto* compare = app.add_subcommand("defend-compare", "Train and compare baseline and defended models");
  for (auto* sub : {synth, train, evaluate_cmd, sweep, compare}) common(sub);
  train->add_option("--mode", o.mode, "baseline | pgd_adv | noise")->capture_default_str();
  evaluate_cmd->add_option("--scenario", o.scenario, "clean | fgsm | pgd | all")->capture_default_str();
  for (auto* sub : {evaluate_cmd, sweep}) {
    sub->add_flag("--no-shap", o.no_shap, "Skip SHAP stability");
    sub->add_flag("--no-semantic", o.no_semantic, "Skip semantic robustness");
  }
  evaluate_cmd->add_flag("--no-bootstrap", o.no_bootstrap, "Skip bootstrap intervals");
  sweep->add_option("--epsilons", o.epsilons, "Budgets to sweep (must include 0)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const auto start = std::chrono::steady_clock::now();
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    int rc = 0;
    if (name == "synth") rc = cmd_synth(o);
    else if (name == "train") rc = cmd_train(o);
    else if (name == "evaluate") rc = cmd_evaluate(o);
    else if (name == "sweep") rc = cmd_sweep(o);
    else rc = cmd_defend_compare(o);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log_line(name, "done", ojson{{"seconds", secs}});
    return rc;
  } catch (const std::exception& e) {
    log_line(name, "failed", ojson{{"error", e.what()}});
    std::cerr << "tabguard " << name << ": " << e.what() << '\n';
    return 1;
  }
}
