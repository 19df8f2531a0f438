#include <gtest/gtest.h>

#include "tabguard/defense.hpp"

using namespace tabguard;

namespace {

struct Data {
  DatasetSchema schema;
  Preprocessor pre;
  Encoded train, val;
};

const Data& data() {
  static const Data d = [] {
    Data out;
    auto synth = generate_synthetic_credit(500, 4, 2, 0.2, 8);
    out.schema = synth.schema;
    const auto raw = normalize_target(synth.table, synth.schema);
    out.pre = fit_preprocessor(raw, synth.schema);
    const auto all = out.pre.transform(raw, synth.schema);
    std::vector<std::size_t> a, b;
    for (std::size_t i = 0; i < all.y.size(); ++i) (i % 4 ? a : b).push_back(i);
    out.train = {gather_rows(all.X, a), gather<int>(all.y, a)};
    out.val = {gather_rows(all.X, b), gather<int>(all.y, b)};
    return out;
  }();
  return d;
}

TrainConfig small() {
  TrainConfig c;
  c.epochs = 3;
  return c;
}

}  // namespace

TEST(Defense, ZeroMixMatchesPlainTraining) {
  DefenseConfig cfg;
  cfg.adv_mix_ratio = 0.0;
  const auto hardened = adversarial_train(data().train, data().val, small(), cfg);
  EXPECT_EQ(hardened.params, train(data().train, data().val, small()).params);
  EXPECT_EQ(hardened.training_mode, "pgd_adv");
}

TEST(Defense, ZeroEpsilonMatchesPlainTraining) {
  DefenseConfig cfg;
  cfg.attack.epsilon = 0.0;
  EXPECT_EQ(adversarial_train(data().train, data().val, small(), cfg).params,
            train(data().train, data().val, small()).params);
}

TEST(Defense, ZeroSigmaMatchesPlainTraining) {
  DefenseConfig cfg;
  cfg.mode = DefenseMode::NoiseRegularized;
  cfg.noise_sigma = 0.0;
  const auto ck = noise_regularized_train(data().train, data().val, small(), cfg);
  EXPECT_EQ(ck.params, train(data().train, data().val, small()).params);
  EXPECT_EQ(ck.training_mode, "noise");
}

TEST(Defense, NoiseReachesEveryColumn) {
  // Noise training has no projector, so immutability cannot be consulted. With
  // one column (immutable in the schema below) noise must still change training.
  DatasetSchema schema;
  schema.features = {{"age", FeatureKind::Numeric, std::nullopt, std::nullopt, true, false}};
  schema.target = "y";
  Encoded one{data().train.X.leftCols(1), data().train.y};
  Encoded one_val{data().val.X.leftCols(1), data().val.y};
  DefenseConfig noisy;
  noisy.mode = DefenseMode::NoiseRegularized;
  noisy.noise_sigma = 0.5;
  DefenseConfig quiet = noisy;
  quiet.noise_sigma = 0.0;
  EXPECT_TRUE(schema.features[0].immutable);
  EXPECT_FALSE(noise_regularized_train(one, one_val, small(), noisy).params ==
               noise_regularized_train(one, one_val, small(), quiet).params);
}

TEST(Defense, HardenedCheckpointRoundTrips) {
  DefenseConfig cfg;
  const auto proj = DomainProjector::from_schema(data().schema, data().pre);
  auto ck = adversarial_train(data().train, data().val, small(), cfg, &proj);
  ck.preprocessor = data().pre;
  ck.schema_fingerprint = data().schema.fingerprint();
  const auto back = checkpoint_from_json(nlohmann::ordered_json::parse(checkpoint_to_json(ck).dump()));
  EXPECT_EQ(back.params, ck.params);
  EXPECT_EQ(back.preprocessor, ck.preprocessor);
  EXPECT_EQ(back.train_config, ck.train_config);
  EXPECT_EQ(back.history, ck.history);
  EXPECT_EQ(back.defense_config.dump(), ck.defense_config.dump());
  EXPECT_EQ(back, ck);
  EXPECT_EQ(back.defense_config["mode"], "pgd_adv_training");
}

TEST(Defense, ConfigValidation) {
  DefenseConfig cfg;
  cfg.adv_mix_ratio = 1.5;
  EXPECT_THROW(cfg.validate(), ParamError);
  cfg = DefenseConfig{};
  cfg.noise_sigma = -1;
  EXPECT_THROW(cfg.validate(), ParamError);
  EXPECT_EQ(defense_mode_from_string("noise"), DefenseMode::NoiseRegularized);
  EXPECT_THROW(defense_mode_from_string("bogus"), ParamError);
  DefenseConfig wrong;
  wrong.mode = DefenseMode::NoiseRegularized;
  EXPECT_THROW(adversarial_train(data().train, data().val, small(), wrong), ParamError);
}
