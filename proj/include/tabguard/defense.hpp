#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "tabguard/attacks.hpp"
#include "tabguard/nn.hpp"

namespace tabguard {

enum class DefenseMode { PgdAdversarialTraining, NoiseRegularized };

std::string to_string(DefenseMode mode);
DefenseMode defense_mode_from_string(const std::string& text);

struct DefenseConfig {
  DefenseMode mode = DefenseMode::PgdAdversarialTraining;
  AttackConfig attack;
  double noise_sigma = 0.05;
  double adv_mix_ratio = 0.5;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static DefenseConfig from_json(const nlohmann::json& j, const AttackConfig& attack_defaults);
};

/// Training where the first round(adv_mix_ratio * batch) rows of every
/// mini-batch are replaced by PGD examples crafted against the current
/// parameters. Everything else matches nn::train.
MlpCheckpoint adversarial_train(const Encoded& train_data, const Encoded& val_data,
                                const TrainConfig& train_cfg, const DefenseConfig& defense_cfg,
                                const DomainProjector* projector = nullptr);

/// Training with N(0, noise_sigma^2) added to every input coordinate of every
/// mini-batch. The immutable mask is deliberately ignored: this is a
/// regularizer, not an attack.
MlpCheckpoint noise_regularized_train(const Encoded& train_data, const Encoded& val_data,
                                      const TrainConfig& train_cfg, const DefenseConfig& defense_cfg);

}  // namespace tabguard
