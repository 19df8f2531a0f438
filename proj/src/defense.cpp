#include "tabguard/defense.hpp"

#include <cmath>

namespace tabguard {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string to_string(DefenseMode mode) {
  return mode == DefenseMode::PgdAdversarialTraining ? "pgd_adv_training" : "noise_regularized";
}

DefenseMode defense_mode_from_string(const std::string& text) {
  if (text == "pgd_adv_training" || text == "pgd_adv") return DefenseMode::PgdAdversarialTraining;
  if (text == "noise_regularized" || text == "noise") return DefenseMode::NoiseRegularized;
  throw ParamError("unknown defense mode '" + text + "'");
}

void DefenseConfig::validate() const {
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ParamError("defense.noise_sigma must be >= 0");
  if (!(adv_mix_ratio >= 0.0 && adv_mix_ratio <= 1.0)) throw ParamError("defense.adv_mix_ratio must lie in [0, 1]");
  attack.validate();
}

ojson DefenseConfig::to_json() const {
  ojson j;
  j["mode"] = to_string(mode);
  j["attack"] = attack.to_json();
  j["noise_sigma"] = noise_sigma;
  j["adv_mix_ratio"] = adv_mix_ratio;
  return j;
}

DefenseConfig DefenseConfig::from_json(const json& j, const AttackConfig& attack_defaults) {
  DefenseConfig c;
  c.attack = attack_defaults;
  if (!j.is_null()) {
    if (j.contains("mode")) c.mode = defense_mode_from_string(j["mode"].get<std::string>());
    if (j.contains("attack")) c.attack = AttackConfig::from_json(j["attack"], attack_defaults);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.adv_mix_ratio = j.value("adv_mix_ratio", c.adv_mix_ratio);
  }
  c.validate();
  return c;
}

namespace {

std::uint64_t batch_key(std::size_t epoch, std::size_t batch) {
  return (static_cast<std::uint64_t>(epoch) << 32) ^ static_cast<std::uint64_t>(batch);
}

}  // namespace

MlpCheckpoint adversarial_train(const Encoded& train_data, const Encoded& val_data,
                                const TrainConfig& train_cfg, const DefenseConfig& defense_cfg,
                                const DomainProjector* projector) {
  if (defense_cfg.mode != DefenseMode::PgdAdversarialTraining) {
    throw ParamError("adversarial_train requires mode pgd_adv_training");
  }
  defense_cfg.validate();
  const std::uint64_t attack_root = derive_seed(defense_cfg.attack.seed, "adv-train");

  BatchAugmenter augment = [&](const BatchContext& ctx, Matrix& X, std::span<const int> y) {
    const auto k = static_cast<Eigen::Index>(
        std::llround(defense_cfg.adv_mix_ratio * static_cast<double>(X.rows())));
    if (k == 0) return;
    AttackConfig cfg = defense_cfg.attack;
    cfg.seed = derive_seed(attack_root, batch_key(ctx.epoch, ctx.batch));
    cfg.threads = 1;
    const Mlp model(ctx.params);
    const Matrix head = X.topRows(k);
    X.topRows(k) = pgd(model, head, y.first(static_cast<std::size_t>(k)), cfg, projector);
  };
  MlpCheckpoint ckpt = train(train_data, val_data, train_cfg, augment);
  ckpt.training_mode = "pgd_adv";
  ckpt.defense_config = defense_cfg.to_json();
  return ckpt;
}

MlpCheckpoint noise_regularized_train(const Encoded& train_data, const Encoded& val_data,
                                      const TrainConfig& train_cfg, const DefenseConfig& defense_cfg) {
  if (defense_cfg.mode != DefenseMode::NoiseRegularized) {
    throw ParamError("noise_regularized_train requires mode noise_regularized");
  }
  defense_cfg.validate();
  const double sigma = defense_cfg.noise_sigma;
  const std::uint64_t noise_root = derive_seed(train_cfg.seed, "noise");

  BatchAugmenter augment;
  if (sigma > 0.0) {
    augment = [=](const BatchContext& ctx, Matrix& X, std::span<const int>) {
      Rng rng(derive_seed(noise_root, batch_key(ctx.epoch, ctx.batch)));
      for (Eigen::Index r = 0; r < X.rows(); ++r) {
        for (Eigen::Index c = 0; c < X.cols(); ++c) X(r, c) += rng.normal(0.0, sigma);
      }
    };
  }
  MlpCheckpoint ckpt = train(train_data, val_data, train_cfg, augment);
  ckpt.training_mode = "noise";
  ckpt.defense_config = defense_cfg.to_json();
  return ckpt;
}

}  // namespace tabguard
