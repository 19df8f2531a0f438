#include <gtest/gtest.h>

#include "tabguard/pipeline.hpp"

using namespace tabguard;

namespace {

nlohmann::json small_json() {
  return nlohmann::json::parse(R"({
    "seed": 7,
    "synth": {"n": 600, "d_numeric": 6, "d_categorical": 2},
    "train": {"epochs": 4, "hidden": [16, 8], "batch_size": 64},
    "econ": {"n_sims": 1000, "bootstrap_sims": 1000},
    "explain": {"n_instances": 6, "n_coalitions": 64, "background_size": 10, "sweep_instances": 4},
    "semantic": {"n_instances": 4},
    "stats": {"bootstrap_b": 100}
  })");
}

struct Fixture {
  RunConfig cfg = RunConfig::from_json(small_json());
  PreparedData data = prepare_data(cfg);
  MlpCheckpoint ckpt = train_model(cfg, data, TrainingMode::Baseline);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST(Config, DerivesStageSeeds) {
  const auto c = RunConfig::defaults(42);
  EXPECT_EQ(c.train.seed, derive_seed(42, "train"));
  EXPECT_EQ(c.attack.seed, derive_seed(42, "attack"));
  EXPECT_NE(c.econ.seed, c.stats.seed);
}

TEST(Config, SeedOverrideWins) {
  const auto c = RunConfig::from_json(small_json(), 99);
  EXPECT_EQ(c.master_seed, 99u);
  EXPECT_EQ(c.train.seed, derive_seed(99, "train"));
}

TEST(Config, UnknownKeysRejected) {
  auto j = small_json();
  j["trian"] = nlohmann::json::object();
  EXPECT_THROW(RunConfig::from_json(j), ParamError);
  auto k = small_json();
  k["synth"]["rows"] = 10;
  EXPECT_THROW(RunConfig::from_json(k), ParamError);
}

TEST(Config, RoundTrip) {
  const auto c = RunConfig::from_json(small_json());
  const auto again = RunConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  EXPECT_EQ(again.to_json().dump(), c.to_json().dump());
}

TEST(Pipeline, PreparedSplitsPartitionRows) {
  const auto& f = fixture();
  EXPECT_EQ(f.data.train.X.rows() + f.data.validation.X.rows() + f.data.test.X.rows(), 600);
  EXPECT_EQ(f.data.test_ids.size(), static_cast<std::size_t>(f.data.test.X.rows()));
  EXPECT_EQ(f.ckpt.training_mode, "baseline");
}

TEST(Pipeline, TrainingIsDeterministic) {
  const auto& f = fixture();
  EXPECT_EQ(train_model(f.cfg, f.data, TrainingMode::Baseline).params, f.ckpt.params);
}

TEST(Pipeline, EvaluateProducesAllScenarios) {
  const auto& f = fixture();
  EvaluateOptions o;
  o.semantic = false;
  o.bootstrap = false;
  const auto ev = evaluate(f.cfg, f.ckpt, f.data, o);
  ASSERT_EQ(ev.inputs.scenarios.size(), 3u);
  ASSERT_EQ(ev.inputs.shap.size(), 2u);
  const auto r = assemble(ev.inputs);
  EXPECT_FALSE(r["scenarios"]["pgd"].is_null());
  EXPECT_EQ(r["null_reasons"]["/semantic"], "disabled");
  EXPECT_LE(r["scenarios"]["pgd"]["discrimination"]["auroc"].get<double>(),
            r["scenarios"]["clean"]["discrimination"]["auroc"].get<double>());
}

TEST(Pipeline, SingleScenarioSkipsComparisons) {
  const auto& f = fixture();
  EvaluateOptions o;
  o.scenarios = {"clean"};
  const auto ev = evaluate(f.cfg, f.ckpt, f.data, o);
  const auto r = assemble(ev.inputs);
  EXPECT_TRUE(r["scenarios"]["fgsm"].is_null());
  EXPECT_TRUE(r["shap_stability"].is_null());
  EXPECT_TRUE(r["bootstrap"].is_null());
}

TEST(Sweep, ZeroBudgetEqualsClean) {
  const auto& f = fixture();
  std::vector<std::string> warnings;
  const auto rows = epsilon_sweep(f.cfg, f.ckpt, f.data, {0.05, 0.0, 0.05}, false, false, &warnings);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].epsilon, 0.0);
  EXPECT_EQ(warnings.size(), 1u);
  Mlp model(f.ckpt.params);
  const double clean = auroc(ScoredSet(model.predict_proba(f.data.test.X), f.data.test.y));
  EXPECT_EQ(rows[0].pgd_auroc, clean);
  EXPECT_LE(rows[1].pgd_auroc, clean);
}

TEST(Sweep, RequiresZero) {
  const auto& f = fixture();
  EXPECT_THROW(epsilon_sweep(f.cfg, f.ckpt, f.data, {0.01, 0.05}, false, false, nullptr), ParamError);
  EXPECT_THROW(epsilon_sweep(f.cfg, f.ckpt, f.data, {0.0, -0.1}, false, false, nullptr), ParamError);
}

TEST(Metadata, RecordsSeedsAndFingerprint) {
  const auto& f = fixture();
  const auto m = run_metadata(f.cfg, f.data, &f.ckpt);
  EXPECT_EQ(m["master_seed"], 7u);
  EXPECT_EQ(m["schema_fingerprint"], f.ckpt.schema_fingerprint);
  EXPECT_EQ(m["data"]["source"]["kind"], "synthetic");
}
