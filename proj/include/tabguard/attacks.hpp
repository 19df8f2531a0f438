#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabguard/common.hpp"
#include "tabguard/dataio.hpp"
#include "tabguard/nn.hpp"

namespace tabguard {

struct AttackConfig {
  double epsilon = 0.05;  // l-inf budget in normalized units; 0 gives the identity attack
  double alpha = 0.01;
  std::size_t steps = 10;
  bool random_start = false;
  bool domain_projector = true;
  bool per_step_domain = false;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 = default_thread_count()

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static AttackConfig from_json(const nlohmann::json& j, AttackConfig defaults);
  static AttackConfig from_json(const nlohmann::json& j);
  bool operator==(const AttackConfig&) const = default;
};

/// Plausibility constraints in normalized space. Bounds are +/-inf where the
/// schema declares none; one-hot columns of mutable categoricals live in [0, 1].
struct DomainProjector {
  Vector lower;
  Vector upper;
  std::vector<bool> immutable;

  static DomainProjector from_schema(const DatasetSchema& schema, const Preprocessor& pre);
  std::size_t dimension() const { return immutable.size(); }
};

/// Clips every coordinate of x_adv into [x - eps, x + eps].
Matrix project_ball(const Matrix& x_adv, const Matrix& x, double epsilon);

/// Restores immutable columns from x_orig and clamps the rest to the bounds.
/// A bound that x_orig itself violates is widened to x_orig so the clean
/// point always stays feasible.
Matrix project_domain(const Matrix& x_adv, const Matrix& x_orig, const DomainProjector& projector);

/// x + eps * sign(grad_x loss), then ball and (optionally) domain projection.
Matrix fgsm(const DifferentiableClassifier& model, const Matrix& X, std::span<const int> y,
            const AttackConfig& cfg, const DomainProjector* projector = nullptr);

/// Iterated signed steps of size alpha with ball projection after each step;
/// domain projection after the last step (or after every step when
/// cfg.per_step_domain is set).
Matrix pgd(const DifferentiableClassifier& model, const Matrix& X, std::span<const int> y,
           const AttackConfig& cfg, const DomainProjector* projector = nullptr);

}  // namespace tabguard
