#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "tabguard/report.hpp"

using namespace tabguard;
namespace fs = std::filesystem;

namespace {

ScenarioBlock block(const std::string& name, double auroc) {
  ScenarioBlock b;
  b.scenario = name;
  b.n = 10;
  b.positives = 3;
  b.discrimination = {auroc, 0.4, 2 * auroc - 1, 0.7};
  b.calibration.ece = 0.05;
  b.calibration.brier = 0.2;
  b.calibration.reliability.total = 10;
  b.calibration.reliability.bins.resize(10);
  for (std::size_t m = 0; m < 10; ++m) {
    b.calibration.reliability.bins[m].lower = m / 10.0;
    b.calibration.reliability.bins[m].upper = (m + 1) / 10.0;
  }
  b.economic.expected_loss = 12.5;
  b.economic.var = 20;
  b.economic.es = 22;
  b.economic.n_sims = 100;
  b.cap = {{0, 0}, {0.5, 0.8}, {1, 1}};
  b.fairness_null_reason = "no_sensitive_feature";
  return b;
}

ReportInputs clean_only() {
  ReportInputs in;
  in.model_name = "mlp";
  in.training_mode = "baseline";
  in.metadata = nlohmann::ordered_json{{"master_seed", 42}};
  in.scenarios.push_back(block("clean", 0.8));
  return in;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("tabguard_report_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST(Assemble, CleanOnlyHasNullAttackScenarios) {
  const auto r = assemble(clean_only());
  EXPECT_TRUE(r["scenarios"]["fgsm"].is_null());
  EXPECT_TRUE(r["scenarios"]["pgd"].is_null());
  EXPECT_EQ(r["null_reasons"]["/scenarios/fgsm"], "not_run");
  EXPECT_EQ(r["null_reasons"]["/scenarios/pgd"], "not_run");
  EXPECT_EQ(r["null_reasons"]["/scenarios/clean/fairness"], "no_sensitive_feature");
  EXPECT_EQ(r["scenarios"]["clean"]["discrimination"]["auroc"], 0.8);
}

TEST(Assemble, SkippedReasonsPropagate) {
  auto in = clean_only();
  in.skipped_reasons["shap_stability"] = "disabled";
  const auto r = assemble(in);
  EXPECT_TRUE(r["shap_stability"].is_null());
  EXPECT_EQ(r["null_reasons"]["/shap_stability"], "disabled");
  EXPECT_EQ(r["null_reasons"]["/bootstrap"], "not_run");
}

TEST(Assemble, ByteIdentical) {
  auto in = clean_only();
  in.scenarios.push_back(block("pgd", 0.6));
  EXPECT_EQ(assemble(in).dump(2), assemble(in).dump(2));
}

TEST(Assemble, NonFiniteBecomesNullWithReason) {
  auto in = clean_only();
  in.scenarios[0].calibration.ece = std::numeric_limits<double>::quiet_NaN();
  in.scenarios[0].economic.var = std::numeric_limits<double>::infinity();
  const auto r = assemble(in);
  EXPECT_TRUE(r["scenarios"]["clean"]["calibration"]["ece"].is_null());
  EXPECT_EQ(r["null_reasons"]["/scenarios/clean/calibration/ece"], "non_finite");
  EXPECT_EQ(r["null_reasons"]["/scenarios/clean/economic/var"], "non_finite");
}

TEST(Assemble, Rejections) {
  ReportInputs none;
  none.scenarios.push_back(block("pgd", 0.6));
  EXPECT_THROW(assemble(none), AssemblyError);

  auto twice = clean_only();
  twice.scenarios.push_back(block("clean", 0.7));
  EXPECT_THROW(assemble(twice), AssemblyError);

  auto misaligned = clean_only();
  misaligned.scenarios.push_back(block("pgd", 0.6));
  misaligned.scenarios.back().n = 11;
  EXPECT_THROW(assemble(misaligned), AssemblyError);

  auto bins = clean_only();
  bins.scenarios.push_back(block("pgd", 0.6));
  bins.scenarios.back().calibration.reliability.bins.resize(5);
  EXPECT_THROW(assemble(bins), AssemblyError);
}

TEST(Emit, JsonRoundTripRegeneratesCsv) {
  auto in = clean_only();
  in.scenarios.push_back(block("fgsm", 0.7));
  in.scenarios.push_back(block("pgd", 0.6));
  const auto r = assemble(in);
  const auto dir = scratch("roundtrip");
  emit_json(r, dir / "report.json");
  const auto back = load_report(dir / "report.json");
  EXPECT_EQ(back.dump(), r.dump());
  emit_csv(r, dir / "a");
  emit_csv(back, dir / "b");
  for (const auto& f : report_csv_files()) {
    ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
}

TEST(Emit, DiscriminationTable) {
  auto in = clean_only();
  in.scenarios.push_back(block("pgd", 0.6));
  const auto csv = discrimination_csv(assemble(in));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "scenario,auroc,ks,gini,accuracy");
  EXPECT_EQ(line_count(csv), 3u);
  EXPECT_NE(csv.find("\npgd,0.6,0.4,0.2,0.7\n"), std::string::npos);
}

TEST(Emit, SweepTableCarriesNulls) {
  auto in = clean_only();
  in.sweep = {{0.0, 0.8, 12.5, std::nullopt, std::nullopt}, {0.05, 0.65, 13.0, 0.99, std::nullopt}};
  const auto r = assemble(in);
  EXPECT_EQ(r["null_reasons"]["/epsilon_sweep/0/shap_cosine"], "not_run");
  const auto csv = epsilon_sweep_csv(r);
  EXPECT_EQ(line_count(csv), 3u);
}

TEST(Timestamp, FollowsSourceDateEpoch) {
  unsetenv("SOURCE_DATE_EPOCH");
  EXPECT_FALSE(reproducible_timestamp().has_value());
  setenv("SOURCE_DATE_EPOCH", "0", 1);
  EXPECT_EQ(reproducible_timestamp().value(), "1970-01-01T00:00:00Z");
  unsetenv("SOURCE_DATE_EPOCH");
}
