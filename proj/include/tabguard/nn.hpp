#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabguard/common.hpp"
#include "tabguard/dataio.hpp"

namespace tabguard {

struct MlpShape {
  std::size_t input = 0;
  std::size_t hidden1 = 128;
  std::size_t hidden2 = 64;

  std::size_t parameter_count() const {
    return hidden1 * input + hidden1 + hidden2 * hidden1 + hidden2 + hidden2 + 1;
  }
  bool operator==(const MlpShape&) const = default;
};

/// Parameters of the two-hidden-layer MLP, stored as one flat vector so the
/// optimizer and gradient checks can treat them uniformly. Block views:
///   W1 (hidden1 x input), b1, W2 (hidden2 x hidden1), b2, w3 (hidden2), b3.
class MlpParams {
 public:
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  using VectorMap = Eigen::Map<Vector>;
  using ConstVectorMap = Eigen::Map<const Vector>;

  MlpParams() = default;
  explicit MlpParams(MlpShape shape);  // all zeros

  /// Uniform He-style initialization: U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
  static MlpParams he_uniform(MlpShape shape, std::uint64_t seed);

  const MlpShape& shape() const { return shape_; }
  Vector& flat() { return flat_; }
  const Vector& flat() const { return flat_; }

  MatrixMap W1();
  ConstMatrixMap W1() const;
  VectorMap b1();
  ConstVectorMap b1() const;
  MatrixMap W2();
  ConstMatrixMap W2() const;
  VectorMap b2();
  ConstVectorMap b2() const;
  VectorMap w3();
  ConstVectorMap w3() const;
  double& b3();
  double b3() const;

  bool all_finite() const { return flat_.allFinite(); }
  bool operator==(const MlpParams& other) const {
    return shape_ == other.shape_ && flat_.size() == other.flat_.size() && flat_ == other.flat_;
  }

 private:
  std::size_t offset_b1() const { return shape_.hidden1 * shape_.input; }
  std::size_t offset_W2() const { return offset_b1() + shape_.hidden1; }
  std::size_t offset_b2() const { return offset_W2() + shape_.hidden2 * shape_.hidden1; }
  std::size_t offset_w3() const { return offset_b2() + shape_.hidden2; }
  std::size_t offset_b3() const { return offset_w3() + shape_.hidden2; }

  MlpShape shape_;
  Vector flat_;
};

/// Activations kept for backpropagation. Dropout scales are empty in eval mode;
/// otherwise they hold 0 or 1/(1-p) per hidden unit.
struct ForwardPass {
  Matrix z1, a1, z2, a2;
  Matrix drop1, drop2;
  Vector logits;
};

/// Eval-mode forward pass (no dropout). Throws ShapeError on a dimension mismatch.
ForwardPass forward(const MlpParams& params, const Matrix& X);
/// Train-mode forward pass with inverted dropout on both hidden layers.
ForwardPass forward_train(const MlpParams& params, const Matrix& X, double dropout_p, Rng& rng);

Vector predict_proba(const MlpParams& params, const Matrix& X);

/// Mean binary cross-entropy with logits.
double loss_bce(const Vector& logits, std::span<const int> y);
/// Per-row binary cross-entropy with logits.
Vector loss_bce_rows(const Vector& logits, std::span<const int> y);

/// Gradient of the batch-mean BCE with respect to the flat parameter vector.
Vector parameter_gradient(const MlpParams& params, const ForwardPass& pass, const Matrix& X,
                          std::span<const int> y);
/// Per-row gradient of each row's own BCE with respect to its input (eval mode).
Matrix input_gradient(const MlpParams& params, const Matrix& X, std::span<const int> y);

/// A binary classifier exposing exact input gradients of its per-row loss.
class DifferentiableClassifier {
 public:
  virtual ~DifferentiableClassifier() = default;
  virtual std::size_t input_dim() const = 0;
  virtual Vector logits(const Matrix& X) const = 0;
  virtual Matrix input_gradient(const Matrix& X, std::span<const int> y) const = 0;

  Vector predict_proba(const Matrix& X) const;
  std::function<Vector(const Matrix&)> probability_fn() const;
};

class Mlp final : public DifferentiableClassifier {
 public:
  explicit Mlp(MlpParams params) : params_(std::move(params)) {}
  std::size_t input_dim() const override { return params_.shape().input; }
  Vector logits(const Matrix& X) const override;
  Matrix input_gradient(const Matrix& X, std::span<const int> y) const override;
  const MlpParams& params() const { return params_; }

 private:
  MlpParams params_;
};

/// Logistic regression f(x) = sigmoid(w.x + b); used as an analytic surrogate.
class LogisticModel final : public DifferentiableClassifier {
 public:
  LogisticModel(Vector weights, double bias) : w_(std::move(weights)), b_(bias) {}
  std::size_t input_dim() const override { return static_cast<std::size_t>(w_.size()); }
  Vector logits(const Matrix& X) const override;
  Matrix input_gradient(const Matrix& X, std::span<const int> y) const override;

 private:
  Vector w_;
  double b_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  double dropout_p = 0.3;
  std::size_t epochs = 50;
  std::uint64_t seed = 42;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t hidden1 = 128;
  std::size_t hidden2 = 64;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  bool operator==(const TrainConfig&) const = default;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean over batches; NaN for epoch 0
  double val_auroc = 0.0;
  bool operator==(const EpochStats& o) const {
    const bool same_loss = (std::isnan(train_loss) && std::isnan(o.train_loss)) || train_loss == o.train_loss;
    return epoch == o.epoch && same_loss && val_auroc == o.val_auroc;
  }
};

struct MlpCheckpoint {
  static constexpr int kVersion = 1;

  MlpParams params;
  Preprocessor preprocessor;
  TrainConfig train_config;
  double best_val_auroc = 0.0;
  std::size_t best_epoch = 0;
  std::string schema_fingerprint;
  std::string training_mode = "baseline";
  nlohmann::ordered_json defense_config;  // null for plain training
  std::vector<EpochStats> history;

  bool operator==(const MlpCheckpoint&) const = default;
};

/// Receives each training mini-batch after it is assembled and may rewrite
/// its feature rows in place (adversarial or noise augmentation).
struct BatchContext {
  const MlpParams& params;
  std::size_t epoch;
  std::size_t batch;
};
using BatchAugmenter = std::function<void(const BatchContext&, Matrix& X, std::span<const int> y)>;

/// Adam on mean BCE with dropout; validation AUROC is evaluated in eval mode
/// after every epoch and the best epoch's parameters are returned (epoch 0 is
/// the initialization). Throws TrainingError on a non-finite loss.
MlpCheckpoint train(const Encoded& train_data, const Encoded& val_data, const TrainConfig& config,
                    const BatchAugmenter& augment = {});

nlohmann::ordered_json checkpoint_to_json(const MlpCheckpoint& ckpt);
MlpCheckpoint checkpoint_from_json(const nlohmann::ordered_json& j);
void save_checkpoint(const MlpCheckpoint& ckpt, const std::filesystem::path& path);
MlpCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tabguard
