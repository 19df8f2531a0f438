#include "tabguard/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tabguard {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ParamError("attack.epsilon must be finite and >= 0");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParamError("attack.alpha must be positive");
  if (steps < 1) throw ParamError("attack.steps must be at least 1");
}

ojson AttackConfig::to_json() const {
  ojson j;
  j["epsilon"] = epsilon;
  j["alpha"] = alpha;
  j["steps"] = steps;
  j["random_start"] = random_start;
  j["domain_projector"] = domain_projector;
  j["per_step_domain"] = per_step_domain;
  j["seed"] = seed;
  return j;
}

AttackConfig AttackConfig::from_json(const json& j, AttackConfig c) {
  if (j.is_null()) return c;
  c.epsilon = j.value("epsilon", c.epsilon);
  c.alpha = j.value("alpha", c.alpha);
  c.steps = j.value("steps", c.steps);
  c.random_start = j.value("random_start", c.random_start);
  c.domain_projector = j.value("domain_projector", c.domain_projector);
  c.per_step_domain = j.value("per_step_domain", c.per_step_domain);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  c.validate();
  return c;
}

AttackConfig AttackConfig::from_json(const json& j) { return from_json(j, AttackConfig{}); }

DomainProjector DomainProjector::from_schema(const DatasetSchema& schema, const Preprocessor& pre) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t d = pre.dimension();
  DomainProjector p;
  p.lower = Vector::Constant(static_cast<Eigen::Index>(d), -inf);
  p.upper = Vector::Constant(static_cast<Eigen::Index>(d), inf);
  p.immutable.assign(d, false);
  for (std::size_t c = 0; c < d; ++c) {
    const ColumnInfo& col = pre.columns()[c];
    const FeatureSpec* spec = schema.find(col.feature);
    if (!spec) throw SchemaError("preprocessor column '" + col.feature + "' is not in the schema");
    const auto i = static_cast<Eigen::Index>(c);
    if (spec->immutable) p.immutable[c] = true;
    if (col.kind == FeatureKind::Categorical) {
      p.lower[i] = 0.0;
      p.upper[i] = 1.0;
      continue;
    }
    const NumericScaler* s = pre.scaler(col.feature);
    if (!s) throw SchemaError("no scaler for numeric feature '" + col.feature + "'");
    if (spec->lower) p.lower[i] = (*spec->lower - s->mean) / s->std;
    if (spec->upper) p.upper[i] = (*spec->upper - s->mean) / s->std;
  }
  return p;
}

Matrix project_ball(const Matrix& x_adv, const Matrix& x, double epsilon) {
  if (x_adv.rows() != x.rows() || x_adv.cols() != x.cols()) throw ShapeError("project_ball: shape mismatch");
  Matrix out(x_adv.rows(), x_adv.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      out(r, c) = std::clamp(x_adv(r, c), x(r, c) - epsilon, x(r, c) + epsilon);
    }
  }
  return out;
}

Matrix project_domain(const Matrix& x_adv, const Matrix& x_orig, const DomainProjector& p) {
  if (x_adv.rows() != x_orig.rows() || x_adv.cols() != x_orig.cols()) {
    throw ShapeError("project_domain: shape mismatch");
  }
  if (static_cast<std::size_t>(x_adv.cols()) != p.dimension()) {
    throw ShapeError("project_domain: projector width does not match the feature matrix");
  }
  Matrix out = x_adv;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    if (p.immutable[static_cast<std::size_t>(c)]) {
      out.col(c) = x_orig.col(c);
      continue;
    }
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double x = x_orig(r, c);
      out(r, c) = std::clamp(out(r, c), std::min(p.lower[c], x), std::max(p.upper[c], x));
    }
  }
  return out;
}

namespace {

// Rows are processed in fixed-size chunks so the floating-point path of every
// row is the same whatever the thread count.
constexpr std::size_t kChunk = 256;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

template <class Body>
Matrix run_chunked(const Matrix& X, std::span<const int> y, const AttackConfig& cfg, Body body) {
  cfg.validate();
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw ShapeError("attack: rows and labels differ");
  Matrix out(X.rows(), X.cols());
  const std::size_t n = static_cast<std::size_t>(X.rows());
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  const std::size_t threads = cfg.threads ? cfg.threads : default_thread_count();
  parallel_for_blocks(chunks, threads, [&](std::size_t cb, std::size_t ce) {
    for (std::size_t ch = cb; ch < ce; ++ch) {
      const std::size_t r0 = ch * kChunk;
      const std::size_t len = std::min(kChunk, n - r0);
      const auto rows = static_cast<Eigen::Index>(len);
      const Matrix Xc = X.middleRows(static_cast<Eigen::Index>(r0), rows);
      out.middleRows(static_cast<Eigen::Index>(r0), rows) = body(Xc, y.subspan(r0, len), r0);
    }
  });
  return out;
}

Matrix signed_step(const Matrix& x, const Matrix& grad, double size) {
  return x + size * grad.unaryExpr([](double g) { return sign(g); });
}

}  // namespace

Matrix fgsm(const DifferentiableClassifier& model, const Matrix& X, std::span<const int> y,
            const AttackConfig& cfg, const DomainProjector* projector) {
  return run_chunked(X, y, cfg, [&](const Matrix& Xc, std::span<const int> yc, std::size_t) {
    Matrix adv = project_ball(signed_step(Xc, model.input_gradient(Xc, yc), cfg.epsilon), Xc, cfg.epsilon);
    if (cfg.domain_projector && projector) adv = project_domain(adv, Xc, *projector);
    return adv;
  });
}

Matrix pgd(const DifferentiableClassifier& model, const Matrix& X, std::span<const int> y,
           const AttackConfig& cfg, const DomainProjector* projector) {
  const bool domain = cfg.domain_projector && projector;
  return run_chunked(X, y, cfg, [&](const Matrix& Xc, std::span<const int> yc, std::size_t r0) {
    Matrix adv = Xc;
    if (cfg.random_start) {
      for (Eigen::Index r = 0; r < adv.rows(); ++r) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(r0 + static_cast<std::size_t>(r))));
        for (Eigen::Index c = 0; c < adv.cols(); ++c) adv(r, c) += rng.uniform(-cfg.epsilon, cfg.epsilon);
      }
      adv = project_ball(adv, Xc, cfg.epsilon);
      if (cfg.per_step_domain && domain) adv = project_domain(adv, Xc, *projector);
    }
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      adv = project_ball(signed_step(adv, model.input_gradient(adv, yc), cfg.alpha), Xc, cfg.epsilon);
      if (cfg.per_step_domain && domain) adv = project_domain(adv, Xc, *projector);
    }
    if (domain) adv = project_domain(adv, Xc, *projector);
    return adv;
  });
}

}  // namespace tabguard
