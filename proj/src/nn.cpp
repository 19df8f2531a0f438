#include "tabguard/nn.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tabguard/metrics.hpp"

namespace tabguard {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

MlpParams::MlpParams(MlpShape shape)
    : shape_(shape), flat_(Vector::Zero(static_cast<Eigen::Index>(shape.parameter_count()))) {
  if (shape.input == 0 || shape.hidden1 == 0 || shape.hidden2 == 0) {
    throw ShapeError("MLP dimensions must be positive");
  }
}

MlpParams MlpParams::he_uniform(MlpShape shape, std::uint64_t seed) {
  MlpParams p(shape);
  Rng rng(seed);
  auto fill = [&](auto block, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (Eigen::Index c = 0; c < block.cols(); ++c) {
      for (Eigen::Index r = 0; r < block.rows(); ++r) block(r, c) = rng.uniform(-limit, limit);
    }
  };
  fill(p.W1(), shape.input);
  fill(p.W2(), shape.hidden1);
  fill(p.w3(), shape.hidden2);
  return p;
}

#define TABGUARD_BLOCK(name, Type, offset, rows, cols)                                     \
  MlpParams::Type##Map MlpParams::name() {                                                 \
    return Type##Map(flat_.data() + offset, static_cast<Eigen::Index>(rows),               \
                     static_cast<Eigen::Index>(cols));                                     \
  }                                                                                        \
  MlpParams::Const##Type##Map MlpParams::name() const {                                    \
    return Const##Type##Map(flat_.data() + offset, static_cast<Eigen::Index>(rows),        \
                            static_cast<Eigen::Index>(cols));                              \
  }

TABGUARD_BLOCK(W1, Matrix, 0, shape_.hidden1, shape_.input)
TABGUARD_BLOCK(W2, Matrix, offset_W2(), shape_.hidden2, shape_.hidden1)
#undef TABGUARD_BLOCK

MlpParams::VectorMap MlpParams::b1() {
  return VectorMap(flat_.data() + offset_b1(), static_cast<Eigen::Index>(shape_.hidden1));
}
MlpParams::ConstVectorMap MlpParams::b1() const {
  return ConstVectorMap(flat_.data() + offset_b1(), static_cast<Eigen::Index>(shape_.hidden1));
}
MlpParams::VectorMap MlpParams::b2() {
  return VectorMap(flat_.data() + offset_b2(), static_cast<Eigen::Index>(shape_.hidden2));
}
MlpParams::ConstVectorMap MlpParams::b2() const {
  return ConstVectorMap(flat_.data() + offset_b2(), static_cast<Eigen::Index>(shape_.hidden2));
}
MlpParams::VectorMap MlpParams::w3() {
  return VectorMap(flat_.data() + offset_w3(), static_cast<Eigen::Index>(shape_.hidden2));
}
MlpParams::ConstVectorMap MlpParams::w3() const {
  return ConstVectorMap(flat_.data() + offset_w3(), static_cast<Eigen::Index>(shape_.hidden2));
}
double& MlpParams::b3() { return flat_[static_cast<Eigen::Index>(offset_b3())]; }
double MlpParams::b3() const { return flat_[static_cast<Eigen::Index>(offset_b3())]; }

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

namespace {

void check_input(const MlpParams& params, const Matrix& X) {
  if (static_cast<std::size_t>(X.cols()) != params.shape().input) {
    throw ShapeError("input has " + std::to_string(X.cols()) + " columns, model expects " +
                     std::to_string(params.shape().input));
  }
}

void check_labels(const Matrix& X, std::span<const int> y) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw ShapeError("input has " + std::to_string(X.rows()) + " rows but " +
                     std::to_string(y.size()) + " labels");
  }
}

Matrix dropout_scale(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix scale(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) scale(r, c) = rng.uniform() < p ? 0.0 : keep;
  }
  return scale;
}

ForwardPass run_forward(const MlpParams& params, const Matrix& X, double dropout_p, Rng* rng) {
  check_input(params, X);
  ForwardPass f;
  f.z1 = (X * params.W1().transpose()).rowwise() + params.b1().transpose();
  f.a1 = f.z1.cwiseMax(0.0);
  if (rng) {
    f.drop1 = dropout_scale(f.a1.rows(), f.a1.cols(), dropout_p, *rng);
    f.a1.array() *= f.drop1.array();
  }
  f.z2 = (f.a1 * params.W2().transpose()).rowwise() + params.b2().transpose();
  f.a2 = f.z2.cwiseMax(0.0);
  if (rng) {
    f.drop2 = dropout_scale(f.a2.rows(), f.a2.cols(), dropout_p, *rng);
    f.a2.array() *= f.drop2.array();
  }
  f.logits = (f.a2 * params.w3()).array() + params.b3();
  return f;
}

// dL/dlogit for each row's own loss.
Vector logit_residual(const Vector& logits, std::span<const int> y) {
  Vector r(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    r[i] = sigmoid(logits[i]) - static_cast<double>(y[static_cast<std::size_t>(i)]);
  }
  return r;
}

// Gradients of sum_i weight_i * loss_i flowing back to the first hidden
// pre-activation; shared by the parameter and input gradients.
struct Backprop {
  Matrix dz1, dz2;
};

Backprop backprop(const MlpParams& params, const ForwardPass& f, const Vector& dlogit) {
  Backprop b;
  b.dz2 = dlogit * params.w3().transpose();
  b.dz2.array() *= (f.z2.array() > 0.0).cast<double>();
  if (f.drop2.size()) b.dz2.array() *= f.drop2.array();
  b.dz1 = b.dz2 * params.W2();
  b.dz1.array() *= (f.z1.array() > 0.0).cast<double>();
  if (f.drop1.size()) b.dz1.array() *= f.drop1.array();
  return b;
}

}  // namespace

ForwardPass forward(const MlpParams& params, const Matrix& X) {
  return run_forward(params, X, 0.0, nullptr);
}

ForwardPass forward_train(const MlpParams& params, const Matrix& X, double dropout_p, Rng& rng) {
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ParamError("dropout_p must lie in [0, 1)");
  return run_forward(params, X, dropout_p, &rng);
}

Vector predict_proba(const MlpParams& params, const Matrix& X) {
  Vector z = forward(params, X).logits;
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = sigmoid(z[i]);
  return z;
}

Vector loss_bce_rows(const Vector& logits, std::span<const int> y) {
  if (static_cast<std::size_t>(logits.size()) != y.size()) {
    throw ShapeError("loss: logits and labels differ in length");
  }
  Vector out(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double sign = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    out[i] = softplus(-sign * logits[i]);
  }
  return out;
}

double loss_bce(const Vector& logits, std::span<const int> y) {
  if (logits.size() == 0) return 0.0;
  return loss_bce_rows(logits, y).mean();
}

Vector parameter_gradient(const MlpParams& params, const ForwardPass& f, const Matrix& X,
                          std::span<const int> y) {
  check_input(params, X);
  check_labels(X, y);
  const Vector dlogit = logit_residual(f.logits, y) / static_cast<double>(X.rows());
  const Backprop b = backprop(params, f, dlogit);

  MlpParams g(params.shape());
  g.w3() = f.a2.transpose() * dlogit;
  g.b3() = dlogit.sum();
  g.W2() = b.dz2.transpose() * f.a1;
  g.b2() = b.dz2.colwise().sum().transpose();
  g.W1() = b.dz1.transpose() * X;
  g.b1() = b.dz1.colwise().sum().transpose();
  return std::move(g.flat());
}

Matrix input_gradient(const MlpParams& params, const Matrix& X, std::span<const int> y) {
  check_labels(X, y);
  const ForwardPass f = forward(params, X);
  const Backprop b = backprop(params, f, logit_residual(f.logits, y));
  return b.dz1 * params.W1();
}

// ---------------------------------------------------------------------------
// Model wrappers
// ---------------------------------------------------------------------------

Vector DifferentiableClassifier::predict_proba(const Matrix& X) const {
  Vector z = logits(X);
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = sigmoid(z[i]);
  return z;
}

std::function<Vector(const Matrix&)> DifferentiableClassifier::probability_fn() const {
  return [this](const Matrix& X) { return predict_proba(X); };
}

Vector Mlp::logits(const Matrix& X) const { return forward(params_, X).logits; }

Matrix Mlp::input_gradient(const Matrix& X, std::span<const int> y) const {
  return tabguard::input_gradient(params_, X, y);
}

Vector LogisticModel::logits(const Matrix& X) const {
  if (X.cols() != w_.size()) throw ShapeError("logistic model: input width mismatch");
  return (X * w_).array() + b_;
}

Matrix LogisticModel::input_gradient(const Matrix& X, std::span<const int> y) const {
  check_labels(X, y);
  const Vector r = logit_residual(logits(X), y);
  return r * w_.transpose();
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ParamError("learning_rate must be positive");
  if (batch_size == 0) throw ParamError("batch_size must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ParamError("dropout_p must lie in [0, 1)");
  if (hidden1 == 0 || hidden2 == 0) throw ParamError("hidden widths must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ParamError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ParamError("adam_eps must be positive");
}

ojson TrainConfig::to_json() const {
  ojson j;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["dropout_p"] = dropout_p;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["adam_beta1"] = adam_beta1;
  j["adam_beta2"] = adam_beta2;
  j["adam_eps"] = adam_eps;
  j["hidden"] = {hidden1, hidden2};
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.dropout_p = j.value("dropout_p", j.value("dropout", c.dropout_p));
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  if (j.contains("hidden")) {
    const auto h = j["hidden"].get<std::vector<std::size_t>>();
    if (h.size() != 2) throw ParamError("train.hidden must list two widths");
    c.hidden1 = h[0];
    c.hidden2 = h[1];
  }
  return c;
}

namespace {

double validation_auroc(const MlpParams& params, const Encoded& val) {
  return auroc(ScoredSet(predict_proba(params, val.X), val.y, "validation"));
}

}  // namespace

MlpCheckpoint train(const Encoded& train_data, const Encoded& val_data, const TrainConfig& config,
                    const BatchAugmenter& augment) {
  config.validate();
  if (val_data.X.rows() == 0) throw ParamError("validation data is empty");
  if (train_data.X.rows() == 0) throw ParamError("training data is empty");
  if (train_data.X.cols() != val_data.X.cols()) throw ShapeError("train/validation width mismatch");
  check_labels(train_data.X, train_data.y);
  check_labels(val_data.X, val_data.y);

  const MlpShape shape{static_cast<std::size_t>(train_data.X.cols()), config.hidden1, config.hidden2};
  MlpParams params = MlpParams::he_uniform(shape, derive_seed(config.seed, "init"));
  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
  Rng dropout_rng(derive_seed(config.seed, "dropout"));

  MlpCheckpoint ckpt;
  ckpt.train_config = config;
  ckpt.params = params;
  ckpt.best_val_auroc = validation_auroc(params, val_data);
  ckpt.best_epoch = 0;
  ckpt.history.push_back({0, std::nan(""), ckpt.best_val_auroc});

  Vector m = Vector::Zero(params.flat().size());
  Vector v = Vector::Zero(params.flat().size());
  std::size_t step = 0;
  const std::size_t n = static_cast<std::size_t>(train_data.X.rows());
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      Matrix Xb = gather_rows(train_data.X, rows);
      const Labels yb = gather<int>(train_data.y, rows);
      if (augment) augment(BatchContext{params, epoch, batches}, Xb, yb);

      const ForwardPass f = forward_train(params, Xb, config.dropout_p, dropout_rng);
      const double loss = loss_bce(f.logits, yb);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches));
      }
      const Vector g = parameter_gradient(params, f, Xb, yb);

      ++step;
      m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * g;
      v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
      params.flat().array() -= config.learning_rate * (m.array() / c1) /
                               ((v.array() / c2).sqrt() + config.adam_eps);

      loss_sum += loss;
      ++batches;
    }
    if (!params.all_finite()) {
      throw TrainingError("parameters became non-finite at epoch " + std::to_string(epoch));
    }
    const double val_auc = validation_auroc(params, val_data);
    ckpt.history.push_back({epoch, loss_sum / static_cast<double>(batches), val_auc});
    if (val_auc > ckpt.best_val_auroc) {
      ckpt.best_val_auroc = val_auc;
      ckpt.best_epoch = epoch;
      ckpt.params = params;
    }
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// Checkpoint persistence
// ---------------------------------------------------------------------------

namespace {

template <class Block>
ojson block_json(const Block& b) {
  ojson j;
  j["dims"] = {b.rows(), b.cols()};
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(b.size()));
  for (Eigen::Index r = 0; r < b.rows(); ++r) {
    for (Eigen::Index c = 0; c < b.cols(); ++c) data.push_back(b(r, c));
  }
  j["data"] = std::move(data);
  return j;
}

template <class Block>
void block_from_json(Block b, const json& j, const char* name) {
  const auto dims = j.at("dims").get<std::vector<Eigen::Index>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (dims.size() != 2 || dims[0] != b.rows() || dims[1] != b.cols() ||
      static_cast<Eigen::Index>(data.size()) != b.size()) {
    throw FormatError(std::string("checkpoint block '") + name + "' has inconsistent dimensions");
  }
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < b.rows(); ++r) {
    for (Eigen::Index c = 0; c < b.cols(); ++c) b(r, c) = data[k++];
  }
}

}  // namespace

ojson checkpoint_to_json(const MlpCheckpoint& ckpt) {
  ojson j;
  j["version"] = MlpCheckpoint::kVersion;
  const auto& s = ckpt.params.shape();
  ojson params;
  params["shape"] = {{"input", s.input}, {"hidden1", s.hidden1}, {"hidden2", s.hidden2}};
  params["W1"] = block_json(ckpt.params.W1());
  params["b1"] = block_json(ckpt.params.b1());
  params["W2"] = block_json(ckpt.params.W2());
  params["b2"] = block_json(ckpt.params.b2());
  params["w3"] = block_json(ckpt.params.w3());
  params["b3"] = {{"dims", {1, 1}}, {"data", {ckpt.params.b3()}}};
  j["params"] = std::move(params);
  j["preprocessor"] = ckpt.preprocessor.to_json();
  j["train_config"] = ckpt.train_config.to_json();
  j["best_val_auroc"] = ckpt.best_val_auroc;
  j["best_epoch"] = ckpt.best_epoch;
  j["schema_fingerprint"] = ckpt.schema_fingerprint;
  j["training_mode"] = ckpt.training_mode;
  j["defense_config"] = ckpt.defense_config;
  ojson hist = ojson::array();
  for (const auto& e : ckpt.history) {
    ojson h;
    h["epoch"] = e.epoch;
    h["train_loss"] = std::isfinite(e.train_loss) ? ojson(e.train_loss) : ojson(nullptr);
    h["val_auroc"] = e.val_auroc;
    hist.push_back(std::move(h));
  }
  j["history"] = std::move(hist);
  return j;
}

MlpCheckpoint checkpoint_from_json(const ojson& source) {
  const json j(source);
  if (!j.is_object() || !j.contains("version")) throw FormatError("checkpoint has no version field");
  if (!j["version"].is_number_integer() || j["version"].get<int>() != MlpCheckpoint::kVersion) {
    throw FormatError("unsupported checkpoint version " + j["version"].dump() + " (expected " +
                      std::to_string(MlpCheckpoint::kVersion) + ")");
  }
  MlpCheckpoint c;
  try {
    const auto& p = j.at("params");
    const auto& s = p.at("shape");
    c.params = MlpParams({s.at("input").get<std::size_t>(), s.at("hidden1").get<std::size_t>(),
                          s.at("hidden2").get<std::size_t>()});
    block_from_json(c.params.W1(), p.at("W1"), "W1");
    block_from_json(c.params.b1(), p.at("b1"), "b1");
    block_from_json(c.params.W2(), p.at("W2"), "W2");
    block_from_json(c.params.b2(), p.at("b2"), "b2");
    block_from_json(c.params.w3(), p.at("w3"), "w3");
    const auto b3 = p.at("b3").at("data").get<std::vector<double>>();
    if (b3.size() != 1) throw FormatError("checkpoint block 'b3' must hold one value");
    c.params.b3() = b3[0];
    c.preprocessor = Preprocessor::from_json(j.at("preprocessor"));
    c.train_config = TrainConfig::from_json(j.at("train_config"));
    c.best_val_auroc = j.at("best_val_auroc").get<double>();
    c.best_epoch = j.at("best_epoch").get<std::size_t>();
    c.schema_fingerprint = j.at("schema_fingerprint").get<std::string>();
    c.training_mode = j.value("training_mode", std::string("baseline"));
    if (source.contains("defense_config")) c.defense_config = source["defense_config"];
    for (const auto& h : j.at("history")) {
      EpochStats e;
      e.epoch = h.at("epoch").get<std::size_t>();
      e.train_loss = h.at("train_loss").is_null() ? std::nan("") : h["train_loss"].get<double>();
      e.val_auroc = h.at("val_auroc").get<double>();
      c.history.push_back(e);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
  if (c.preprocessor.dimension() != 0 && c.preprocessor.dimension() != c.params.shape().input) {
    throw FormatError("checkpoint preprocessor width does not match the network input");
  }
  if (!c.params.all_finite()) throw FormatError("checkpoint contains non-finite parameters");
  return c;
}

void save_checkpoint(const MlpCheckpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt).dump() << '\n';
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

MlpCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("checkpoint " + path.string() + " is corrupt: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace tabguard
