// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "tabguard/driftfair.hpp"
#include "tabguard/econrisk.hpp"
#include "tabguard/metrics.hpp"
#include "tabguard/pipeline.hpp"
#include "tabguard/semantic.hpp"
#include "tabguard/stats.hpp"

using namespace tabguard;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kFdStep = 1e-5;
constexpr double kFdMaxRelErr = 1e-4;
constexpr double kFdSeconds = 10.0;
constexpr int kFdCases = 100;
constexpr int kFdParamCoords = 50;
constexpr double kKinkMargin = 1e-3;

constexpr double kAurocTol = 1e-12;
constexpr double kGiniTol = 1e-15;
constexpr double kFixtureTol = 1e-12;

constexpr double kBallSlack = 1e-12;
constexpr double kLinearOptimumTol = 1e-12;

constexpr double kPgdDrop = 0.02;
constexpr double kFgsmDrop = 0.015;
constexpr double kTable1Seconds = 180.0;
constexpr std::size_t kEconSims = 50000;

constexpr double kSweepSlack = 0.005;

constexpr double kNoiseBelowBaseline = 0.01;
constexpr double kNoiseAboveAdv = 0.02;
constexpr double kDefenseSeconds = 600.0;

constexpr double kShapLinearTol = 1e-2;
constexpr double kShapAxiomTol = 1e-3;

constexpr double kCosineSlack = 0.02;
constexpr std::size_t kShapInstances = 200;

constexpr double kCoverage = 0.90;
constexpr int kCoverageTrials = 200;

constexpr double kDriftZeroTol = 1e-12;
constexpr double kTranslationTol = 1e-12;
constexpr double kTwoBinPsi = 0.8789;
constexpr double kTwoBinTol = 1e-4;

constexpr double kE2eSeconds = 300.0;

constexpr std::uint64_t kBenchSeed = 42;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Shared benchmark state, built on first use.
struct Bench {
  RunConfig cfg;
  PreparedData data;
  MlpCheckpoint ckpt;
  Evaluation lean;  // attacks and metric suites only
  double lean_seconds = 0.0;
  std::optional<Evaluation> full;
};

Bench& bench() {
  static std::unique_ptr<Bench> b;
  if (!b) {
    const auto t0 = Clock::now();
    b = std::make_unique<Bench>();
    b->cfg = RunConfig::defaults(kBenchSeed);
    b->data = prepare_data(b->cfg);
    b->ckpt = train_model(b->cfg, b->data, TrainingMode::Baseline);
    EvaluateOptions o;
    o.shap = false;
    o.semantic = false;
    o.bootstrap = false;
    b->lean = evaluate(b->cfg, b->ckpt, b->data, o);
    b->lean_seconds = seconds_since(t0);
  }
  return *b;
}

const Evaluation& full_evaluation() {
  auto& b = bench();
  if (!b.full) {
    EvaluateOptions o;
    b.full = evaluate(b.cfg, b.ckpt, b.data, o);
  }
  return *b.full;
}

const ScenarioBlock& scenario(const Evaluation& ev, const std::string& name) {
  for (const auto& s : ev.inputs.scenarios) {
    if (s.scenario == name) return s;
  }
  throw std::runtime_error("scenario " + name + " missing from evaluation");
}

const StabilityBlock& shap_block(const Evaluation& ev, const std::string& name) {
  for (const auto& s : ev.inputs.shap) {
    if (s.scenario == name) return s;
  }
  throw std::runtime_error("no SHAP block for " + name);
}

// ---------------------------------------------------------------------------
// 1. gradients

double row_preact_margin(const MlpParams& p, const Matrix& X) {
  const ForwardPass f = forward(p, X);
  return std::min(f.z1.cwiseAbs().minCoeff(), f.z2.cwiseAbs().minCoeff());
}

Outcome criterion_gradients() {
  const auto t0 = Clock::now();
  double worst_input = 0.0, worst_param = 0.0;
  Rng rng(derive_seed(kBenchSeed, "acceptance-gradients"));
  for (int c = 0; c < kFdCases; ++c) {
    const MlpShape shape{2 + rng.index(11), 4 + rng.index(21), 3 + rng.index(10)};
    MlpParams p = MlpParams::he_uniform(shape, rng.next());
    for (Eigen::Index i = 0; i < p.flat().size(); ++i) p.flat()[i] += 0.05 * rng.normal();
    const Eigen::Index rows = 3;
    Matrix X(rows, static_cast<Eigen::Index>(shape.input));
    std::vector<int> y;
    for (Eigen::Index i = 0; i < rows; ++i) {
      // Redraw rows that sit on a ReLU kink, where the loss is not differentiable.
      for (int tries = 0;; ++tries) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = rng.normal();
        if (row_preact_margin(p, X.row(i)) > kKinkMargin || tries > 1000) break;
      }
      y.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }

    const Matrix g = input_gradient(p, X, y);
    for (Eigen::Index i = 0; i < rows; ++i) {
      std::vector<double> x(static_cast<std::size_t>(X.cols()));
      for (Eigen::Index j = 0; j < X.cols(); ++j) x[static_cast<std::size_t>(j)] = X(i, j);
      for (Eigen::Index j = 0; j < X.cols(); ++j) {
        auto xp = x, xm = x;
        xp[static_cast<std::size_t>(j)] += kFdStep;
        xm[static_cast<std::size_t>(j)] -= kFdStep;
        const double fd =
            (oracle::mlp_row_loss(p, xp, y[static_cast<std::size_t>(i)]) -
             oracle::mlp_row_loss(p, xm, y[static_cast<std::size_t>(i)])) / (2 * kFdStep);
        worst_input = std::max(worst_input, oracle::relative_error(g(i, j), fd));
      }
    }

    const Vector pg = parameter_gradient(p, forward(p, X), X, y);
    auto mean_loss = [&](const MlpParams& q) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < rows; ++i) {
        std::vector<double> x(static_cast<std::size_t>(X.cols()));
        for (Eigen::Index j = 0; j < X.cols(); ++j) x[static_cast<std::size_t>(j)] = X(i, j);
        s += oracle::mlp_row_loss(q, x, y[static_cast<std::size_t>(i)]);
      }
      return s / static_cast<double>(rows);
    };
    for (int k = 0; k < kFdParamCoords; ++k) {
      const auto idx = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(p.flat().size())));
      MlpParams a = p, b = p;
      a.flat()[idx] += kFdStep;
      b.flat()[idx] -= kFdStep;
      const double fd = (mean_loss(a) - mean_loss(b)) / (2 * kFdStep);
      worst_param = std::max(worst_param, oracle::relative_error(pg[idx], fd));
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst_input < kFdMaxRelErr && worst_param < kFdMaxRelErr && secs < kFdSeconds;
  o.detail = "max rel err input " + num(worst_input, 3) + ", params " + num(worst_param, 3) + " over " +
             std::to_string(kFdCases) + " cases in " + num(secs, 3) + " s";
  return o;
}

// ---------------------------------------------------------------------------
// 2. metric oracles

Outcome criterion_metrics() {
  Rng rng(derive_seed(kBenchSeed, "acceptance-metrics"));
  double worst_auc = 0.0, worst_gini = 0.0;
  bool ks_exact = true;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.index(499);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // coarse grid so ties are common
      s[i] = t % 2 ? std::round(rng.uniform() * 20.0) / 20.0 : rng.uniform();
      y[i] = rng.bernoulli(0.3) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    const ScoredSet set(s, y);
    const double a = auroc(set);
    worst_auc = std::max(worst_auc, std::abs(a - oracle::auroc_pairs(s, y)));
    worst_gini = std::max(worst_gini, std::abs(gini(set) - (2 * a - 1)));
    ks_exact = ks_exact && ks_stat(set) == oracle::ks_scan(s, y);
  }

  // scores 0.1, 0.4, 0.35, 0.8 with labels 0, 0, 1, 1:
  //   Brier = (0.01 + 0.16 + 0.4225 + 0.04) / 4 = 0.158125
  //   ECE (10 bins) = 0.25*0.1 + 0.5*|0.5-0.375| + 0.25*0.2 = 0.1375
  const ScoredSet fixture(std::vector<double>{0.1, 0.4, 0.35, 0.8}, Labels{0, 0, 1, 1});
  const bool brier_ok = std::abs(brier(fixture) - 0.158125) <= kFixtureTol;
  const bool ece_ok = std::abs(ece(fixture, 10).ece - 0.1375) <= kFixtureTol;

  // 10 negatives at 0..9; positives: 7 at 9.5, 11 at 6.5, 2 at -0.5 -> 147 of 200 pairs.
  std::vector<double> s;
  Labels y;
  for (int k = 0; k < 10; ++k) s.push_back(k), y.push_back(0);
  for (int k = 0; k < 7; ++k) s.push_back(9.5), y.push_back(1);
  for (int k = 0; k < 11; ++k) s.push_back(6.5), y.push_back(1);
  for (int k = 0; k < 2; ++k) s.push_back(-0.5), y.push_back(1);
  const ScoredSet t1(s, y);
  const bool table_ok = std::abs(auroc(t1) - 0.7350) <= kFixtureTol && std::abs(gini(t1) - 0.470) <= 1e-12;

  Outcome o;
  o.pass = worst_auc <= kAurocTol && worst_gini <= kGiniTol && ks_exact && brier_ok && ece_ok && table_ok;
  o.detail = "auroc |err| " + num(worst_auc, 3) + ", gini |err| " + num(worst_gini, 3) + ", ks exact " +
             (ks_exact ? "yes" : "no") + ", brier/ece fixtures " + (brier_ok && ece_ok ? "ok" : "off") +
             ", auc 0.735 -> gini " + num(gini(t1), 4);
  return o;
}

// ---------------------------------------------------------------------------
// 3. attack contracts

Outcome criterion_attacks() {
  auto& b = bench();
  const Mlp model(b.ckpt.params);
  const Matrix& X = b.data.test.X;
  const Labels& y = b.data.test.y;
  const auto proj = DomainProjector::from_schema(b.data.schema, b.data.pre);
  const AttackConfig& cfg = b.cfg.attack;

  bool budget = true, immutable = true;
  double worst_step = 0.0;
  for (const Matrix* adv : {&b.lean.adversarial.at("fgsm"), &b.lean.adversarial.at("pgd")}) {
    const double step = (*adv - X).cwiseAbs().maxCoeff();
    worst_step = std::max(worst_step, step);
    budget = budget && step <= cfg.epsilon + kBallSlack;
    for (std::size_t c = 0; c < proj.dimension(); ++c) {
      if (!proj.immutable[c]) continue;
      const auto col = static_cast<Eigen::Index>(c);
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        immutable = immutable && std::memcmp(&(*adv)(i, col), &X(i, col), sizeof(double)) == 0;
      }
    }
  }

  AttackConfig one = cfg;
  one.steps = 1;
  one.random_start = false;
  one.alpha = cfg.epsilon;
  const Matrix a = pgd(model, X, y, one, &proj), f = fgsm(model, X, y, one, &proj);
  const bool single_step = a.rows() == f.rows() && std::memcmp(a.data(), f.data(), sizeof(double) * a.size()) == 0;

  Rng rng(derive_seed(kBenchSeed, "acceptance-linear"));
  Vector w(8);
  for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = rng.normal();
  const LogisticModel lin(w, 0.3);
  Matrix Z(50, 8);
  for (Eigen::Index i = 0; i < Z.size(); ++i) Z.data()[i] = rng.normal();
  std::vector<int> yz(50);
  for (auto& v : yz) v = rng.bernoulli(0.5) ? 1 : 0;
  AttackConfig lc;
  lc.epsilon = 0.05;
  lc.alpha = 0.01;
  lc.steps = 10;
  const Matrix za = pgd(lin, Z, yz, lc);
  double worst_lin = 0.0;
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    // Loss increases along +w for y=0 and along -w for y=1.
    const double dir = yz[static_cast<std::size_t>(i)] == 1 ? -1.0 : 1.0;
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      const double target = Z(i, j) + lc.epsilon * dir * (w[j] > 0 ? 1.0 : -1.0);
      worst_lin = std::max(worst_lin, std::abs(za(i, j) - target));
    }
  }

  Outcome o;
  o.pass = budget && immutable && single_step && worst_lin <= kLinearOptimumTol;
  o.detail = "max |dx| " + num(worst_step, 8) + " (eps " + num(cfg.epsilon) + "), immutable " +
             (immutable ? "bit-identical" : "changed") + ", pgd(T=1) == fgsm " + (single_step ? "yes" : "no") +
             ", linear optimum |err| " + num(worst_lin, 3);
  return o;
}

// ---------------------------------------------------------------------------
// 4-6. directional reproduction on the benchmark

Outcome criterion_table1() {
  auto& b = bench();
  const double clean = scenario(b.lean, "clean").discrimination.auroc;
  const double fg = scenario(b.lean, "fgsm").discrimination.auroc;
  const double pg = scenario(b.lean, "pgd").discrimination.auroc;
  Outcome o;
  o.pass = pg <= clean - kPgdDrop && fg <= clean - kFgsmDrop && b.lean_seconds < kTable1Seconds;
  o.detail = "AUROC clean " + num(clean, 4) + ", fgsm " + num(fg, 4) + ", pgd " + num(pg, 4) + " at eps " +
             num(b.cfg.attack.epsilon) + "; " + num(b.lean_seconds, 3) + " s";
  return o;
}

Outcome criterion_table2() {
  auto& b = bench();
  const auto& c = scenario(b.lean, "clean").calibration;
  bool pass = true;
  std::string detail = "ECE/Brier clean " + num(c.ece, 4) + "/" + num(c.brier, 4);
  for (const char* name : {"fgsm", "pgd"}) {
    const auto& a = scenario(b.lean, name).calibration;
    pass = pass && a.ece > c.ece && a.brier > c.brier;
    detail += std::string(", ") + name + " " + num(a.ece, 4) + "/" + num(a.brier, 4);
  }
  return {pass, detail};
}

Outcome criterion_table3() {
  auto& b = bench();
  const auto& c = scenario(b.lean, "clean").economic;
  const auto& p = scenario(b.lean, "pgd").economic;
  Outcome o;
  o.pass = c.n_sims == kEconSims && p.n_sims == kEconSims && p.expected_loss > c.expected_loss && p.var >= c.var &&
           p.es >= c.es;
  o.detail = "EL " + num(c.expected_loss, 6) + " -> " + num(p.expected_loss, 6) + ", VaR95 " + num(c.var, 6) +
             " -> " + num(p.var, 6) + ", ES95 " + num(c.es, 6) + " -> " + num(p.es, 6) + " (" +
             std::to_string(p.n_sims) + " sims)";
  return o;
}

// ---------------------------------------------------------------------------
// 7. VaR/ES oracles

Outcome criterion_var_es() {
  std::vector<double> l(100);
  for (int i = 0; i < 100; ++i) l[static_cast<std::size_t>(i)] = i + 1;
  const auto d = LossDistribution::from_losses(l);
  const bool fixture = var(d, 0.95) == 95.0 && es(d, 0.95) == 97.5 && var(d, 0.95) == oracle::var_sorted(l, 0.95) &&
                       es(d, 0.95) == oracle::es_tail_mean(l, 0.95);
  Rng rng(derive_seed(kBenchSeed, "acceptance-var"));
  int ordered = 0, oracle_match = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.index(400);
    std::vector<double> v(n);
    for (auto& x : v) x = t % 3 == 0 ? std::round(rng.uniform() * 10) : std::exp(rng.normal());
    const double alpha = 0.5 + 0.49 * rng.uniform();
    const auto dist = LossDistribution::from_losses(v);
    const double va = var(dist, alpha), e = es(dist, alpha);
    ordered += e >= va;
    oracle_match += va == oracle::var_sorted(v, alpha) && std::abs(e - oracle::es_tail_mean(v, alpha)) <= 1e-12 * std::abs(e);
  }
  Outcome o;
  o.pass = fixture && ordered == 1000 && oracle_match == 1000;
  o.detail = std::string("1..100 fixture ") + (fixture ? "VaR 95, ES 97.5" : "mismatch") + "; ES >= VaR on " +
             std::to_string(ordered) + "/1000, oracle agreement on " + std::to_string(oracle_match) + "/1000";
  return o;
}

// ---------------------------------------------------------------------------
// 8. epsilon sweep

Outcome criterion_sweep() {
  auto& b = bench();
  std::vector<std::string> warnings;
  const auto rows = epsilon_sweep(b.cfg, b.ckpt, b.data, {0.0, 0.01, 0.05, 0.10}, false, false, &warnings);
  const double clean = scenario(b.lean, "clean").discrimination.auroc;
  bool monotone = rows.size() == 4;
  std::string detail = "AUROC";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    detail += " " + num(rows[k].epsilon) + ":" + num(rows[k].pgd_auroc, 4);
    if (k > 0) monotone = monotone && rows[k].pgd_auroc <= rows[k - 1].pgd_auroc + kSweepSlack;
  }
  const bool zero_exact = !rows.empty() && rows[0].epsilon == 0.0 && rows[0].pgd_auroc == clean;
  detail += zero_exact ? "; eps=0 equals clean exactly" : "; eps=0 differs from clean " + num(clean, 17);
  return {monotone && zero_exact, detail};
}

// ---------------------------------------------------------------------------
// 9. defense ordering

Outcome criterion_defense() {
  const auto t0 = Clock::now();
  std::map<std::string, double> mean;
  std::string per_seed;
  const std::vector<std::uint64_t> seeds{41, 42, 43};
  for (std::uint64_t seed : seeds) {
    const RunConfig cfg = RunConfig::defaults(seed);
    const PreparedData data = prepare_data(cfg);
    const auto rows = defend_compare(cfg, data, nullptr);
    per_seed += " [" + std::to_string(seed);
    for (const auto& r : rows) {
      mean[r.model] += r.pgd_auroc / static_cast<double>(seeds.size());
      per_seed += " " + r.model + " " + num(r.pgd_auroc, 4);
    }
    per_seed += "]";
  }
  const double secs = seconds_since(t0);
  const double base = mean.at("baseline"), adv = mean.at("pgd_adv"), noise = mean.at("noise");
  Outcome o;
  o.pass = adv > base && noise >= base - kNoiseBelowBaseline && noise <= adv + kNoiseAboveAdv && secs < kDefenseSeconds;
  o.detail = "mean PGD AUROC baseline " + num(base, 4) + ", pgd_adv " + num(adv, 4) + ", noise " + num(noise, 4) +
             ";" + per_seed + "; " + num(secs, 3) + " s";
  return o;
}

// ---------------------------------------------------------------------------
// 10. kernel SHAP

Outcome criterion_shap_axioms() {
  Rng rng(derive_seed(kBenchSeed, "acceptance-shap"));
  double worst_linear = 0.0;
  for (const auto& [d, budget] : std::vector<std::pair<std::size_t, std::size_t>>{{6, 2048}, {16, 512}}) {
    Vector w(static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = rng.normal();
    const double bias = rng.normal();
    const PredictFn f = [w, bias](const Matrix& X) -> Vector { return (X * w).array() + bias; };
    Matrix bg(30, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < bg.size(); ++i) bg.data()[i] = rng.normal();
    const Eigen::RowVectorXd mu = bg.colwise().mean();
    for (int t = 0; t < 5; ++t) {
      Eigen::RowVectorXd x(static_cast<Eigen::Index>(d));
      for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = rng.normal();
      const auto a = kernel_shap(f, x, bg, singleton_groups(d), budget, rng.next());
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        worst_linear = std::max(worst_linear, std::abs(a.values[j] - w[j] * (x[j] - mu[j])));
      }
    }
  }

  // Interaction model over columns 0..3; columns 4..7 are dummies.
  const PredictFn g = [](const Matrix& X) -> Vector {
    Vector out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      out[i] = 1.0 / (1.0 + std::exp(-(X(i, 0) * X(i, 1) + std::sin(X(i, 2)) - 0.5 * X(i, 3))));
    }
    return out;
  };
  Matrix bg(25, 8);
  for (Eigen::Index i = 0; i < bg.size(); ++i) bg.data()[i] = rng.normal();
  double worst_dummy = 0.0, worst_eff = 0.0;
  std::size_t checked = 0;
  for (int t = 0; t < 10; ++t) {
    Eigen::RowVectorXd x(8);
    for (Eigen::Index j = 0; j < 8; ++j) x[j] = rng.normal();
    const auto a = kernel_shap(g, x, bg, singleton_groups(8), 2048, rng.next());
    for (Eigen::Index j = 4; j < 8; ++j) worst_dummy = std::max(worst_dummy, std::abs(a.values[j]));
    worst_eff = std::max(worst_eff, std::abs(a.base + a.values.sum() - a.prediction));
    ++checked;
  }

  // Every attribution produced on the benchmark.
  const auto& ev = full_evaluation();
  for (const auto& blk : ev.inputs.shap) {
    for (const auto* side : {&blk.stats.clean, &blk.stats.adversarial}) {
      for (const auto& a : *side) {
        worst_eff = std::max(worst_eff, std::abs(a.base + a.values.sum() - a.prediction));
        ++checked;
      }
    }
  }
  Outcome o;
  o.pass = worst_linear <= kShapLinearTol && worst_eff <= kShapAxiomTol && worst_dummy <= kShapAxiomTol;
  o.detail = "linear |err| " + num(worst_linear, 3) + ", efficiency |err| " + num(worst_eff, 3) + " over " +
             std::to_string(checked) + " attributions, dummy |phi| " + num(worst_dummy, 3);
  return o;
}

// ---------------------------------------------------------------------------
// 11. SHAP stability direction

Outcome criterion_shap_direction() {
  const auto& ev = full_evaluation();
  const auto& fg = shap_block(ev, "fgsm").stats;
  const auto& pg = shap_block(ev, "pgd").stats;
  Outcome o;
  o.pass = bench().cfg.explain.n_instances == kShapInstances && pg.cosine.size() == kShapInstances &&
           fg.cosine.size() == kShapInstances && pg.cosine_summary.mean <= fg.cosine_summary.mean + kCosineSlack;
  o.detail = "mean cosine fgsm " + num(fg.cosine_summary.mean, 5) + ", pgd " + num(pg.cosine_summary.mean, 5) +
             " over " + std::to_string(pg.cosine.size()) + " instances";
  return o;
}

// ---------------------------------------------------------------------------
// 12. bootstrap

Outcome criterion_bootstrap() {
  const std::vector<double> constant(40, 2.5);
  BootstrapConfig cc;
  cc.seed = 1;
  const auto flat = bootstrap_ci(
      [&](std::span<const std::size_t> rows) {
        double s = 0;
        for (auto r : rows) s += constant[r];
        return s / static_cast<double>(rows.size());
      },
      constant.size(), cc);
  const bool collapses = flat.lower == flat.point && flat.upper == flat.point;

  int covered = 0;
  for (int t = 0; t < kCoverageTrials; ++t) {
    Rng r(derive_seed(kBenchSeed, static_cast<std::uint64_t>(t)));
    std::vector<double> v(1000);
    for (auto& x : v) x = r.bernoulli(0.5) ? 1.0 : 0.0;
    BootstrapConfig bc;
    bc.seed = derive_seed(kBenchSeed + 1, static_cast<std::uint64_t>(t));
    const auto ci = bootstrap_ci(
        [&](std::span<const std::size_t> rows) {
          double s = 0;
          for (auto i : rows) s += v[i];
          return s / static_cast<double>(rows.size());
        },
        v.size(), bc);
    covered += ci.lower <= 0.5 && 0.5 <= ci.upper;
  }
  const double coverage = covered / static_cast<double>(kCoverageTrials);

  const auto& ev = full_evaluation();
  const BootstrapEntry* auc = nullptr;
  for (const auto& e : ev.inputs.bootstrap) {
    if (e.metric == "auroc") auc = &e;
  }
  Outcome o;
  o.pass = collapses && coverage >= kCoverage && auc != nullptr;
  o.detail = std::string("constant collapses ") + (collapses ? "yes" : "no") + ", coverage " + num(coverage, 3);
  if (auc) {
    const bool sep = ci_separated(auc->ci.a, auc->ci.b);
    o.detail += ", AUROC " + auc->scenario_a + " [" + num(auc->ci.a.lower, 4) + ", " + num(auc->ci.a.upper, 4) +
                "] vs " + auc->scenario_b + " [" + num(auc->ci.b.lower, 4) + ", " + num(auc->ci.b.upper, 4) +
                "], separated: " + (sep ? "yes" : "no");
  } else {
    o.detail += ", no paired AUROC interval";
  }
  return o;
}

// ---------------------------------------------------------------------------
// 13. drift

Outcome criterion_drift() {
  Rng rng(derive_seed(kBenchSeed, "acceptance-drift"));
  std::vector<double> a(700), b(500);
  for (auto& x : a) x = rng.normal();
  for (auto& x : b) x = rng.normal(0.3, 1.5);
  const double zero = std::max({psi(a, a), ks_distance(a, a), wasserstein1(a, a)});
  const double c = 0.37;
  std::vector<double> ac = a, bc = b;
  for (auto& x : ac) x += c;
  for (auto& x : bc) x += c;
  const double shift_err = std::abs(wasserstein1(a, ac) - c);
  const double invariance_err = std::abs(wasserstein1(ac, bc) - wasserstein1(a, b));
  const double two_bin = psi_from_probabilities(std::vector<double>{0.5, 0.5}, std::vector<double>{0.9, 0.1});
  Outcome o;
  o.pass = zero <= kDriftZeroTol && shift_err <= kTranslationTol && invariance_err <= kTranslationTol &&
           std::abs(two_bin - kTwoBinPsi) <= kTwoBinTol;
  o.detail = "identical-input max " + num(zero, 3) + ", W1 shift |err| " + num(shift_err, 3) +
             ", translation |err| " + num(invariance_err, 3) + ", two-bin PSI " + num(two_bin, 10);
  return o;
}

// ---------------------------------------------------------------------------
// 14. semantic stub

Outcome criterion_semantic() {
  auto& b = bench();
  const auto& ev = full_evaluation();
  const auto& shap = shap_block(ev, "pgd");
  std::vector<ExplanationCase> cases;
  for (std::size_t k = 0; k < std::min<std::size_t>(b.cfg.semantic.n_instances, shap.stats.rows.size()); ++k) {
    const auto r = static_cast<Eigen::Index>(shap.stats.rows[k]);
    const auto& a = shap.stats.clean[k];
    cases.push_back(make_case(shap.row_ids[k], "clean", a.prediction, b.data.pre.features(),
                              b.data.pre.decode_row(b.data.test.X.row(r)),
                              std::vector<double>(a.values.data(), a.values.data() + a.values.size()),
                              b.cfg.semantic.top_k));
  }
  StubProvider stub;
  const auto same = sri(cases, cases, stub);
  const auto again = sri(cases, cases, stub);

  bool pipeline_ok = !ev.inputs.semantic.empty();
  std::string detail;
  for (const auto& blk : ev.inputs.semantic) {
    pipeline_ok = pipeline_ok && blk.result.provider == "stub" && blk.result.failures == 0 && blk.result.sri >= 0.0 &&
                  blk.result.sri <= 1.0;
    detail += ", " + blk.scenario + " SRI " + num(blk.result.sri, 4) + " (" + blk.result.provider + ")";
  }
  Outcome o;
  o.pass = same.sri == 1.0 && again.sri == 1.0 && pipeline_ok && b.cfg.semantic.provider == "stub" &&
           std::getenv("TABGUARD_LLM_KEY") == nullptr;
  o.detail = "identical inputs SRI " + num(same.sri) + " over " + std::to_string(cases.size()) + " instances" + detail +
             ", no credential in environment";
  return o;
}

// ---------------------------------------------------------------------------
// 15. end to end through the CLI

std::map<std::string, std::string> artifacts(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension();
    if (ext != ".json" && ext != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[fs::relative(e.path(), root).generic_string()] = s.str();
  }
  return out;
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

Outcome criterion_end_to_end(const fs::path& work) {
  std::vector<double> times;
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* tag : {"run_a", "run_b"}) {
    const fs::path out = work / tag;
    fs::remove_all(out);
    fs::create_directories(out);
    const auto t0 = Clock::now();
    for (const std::string step : {"synth", "train", "evaluate --scenario all", "sweep"}) {
      const std::string cmd = quote(TABGUARD_CLI_PATH) + " " + step + " --seed " + std::to_string(kBenchSeed) +
                              " --out " + quote(out.string()) + " >>" + quote((out / "stdout.log").string()) +
                              " 2>>" + quote((out / "stderr.log").string());
      if (std::system(cmd.c_str()) != 0) return {false, "'" + step + "' failed; see " + (out / "stderr.log").string()};
    }
    times.push_back(seconds_since(t0));
    runs.push_back(artifacts(out));
  }
  std::vector<std::string> differing;
  for (const auto& [path, bytes] : runs[0]) {
    const auto it = runs[1].find(path);
    if (it == runs[1].end() || it->second != bytes) differing.push_back(path);
  }
  for (const auto& [path, bytes] : runs[1]) {
    if (!runs[0].count(path)) differing.push_back(path);
  }
  const double slowest = *std::max_element(times.begin(), times.end());
  Outcome o;
  o.pass = differing.empty() && !runs[0].empty() && slowest < kE2eSeconds;
  o.detail = std::to_string(runs[0].size()) + " JSON/CSV artifacts, " +
             (differing.empty() ? std::string("byte-identical") : std::to_string(differing.size()) + " differ (first: " + differing[0] + ")") +
             "; run times " + num(times[0], 4) + " s, " + num(times[1], 4) + " s";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tabguard acceptance suite"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work-dir", work, "Scratch directory for end-to-end runs")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);
  unsetenv("TABGUARD_LLM_KEY");

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", criterion_gradients},
      {"metric oracles", criterion_metrics},
      {"attack contracts", criterion_attacks},
      {"AUROC degradation under attack", criterion_table1},
      {"calibration degradation under attack", criterion_table2},
      {"portfolio loss increase under attack", criterion_table3},
      {"VaR/ES oracles", criterion_var_es},
      {"epsilon sweep", criterion_sweep},
      {"defense ordering", criterion_defense},
      {"kernel SHAP axioms", criterion_shap_axioms},
      {"SHAP stability direction", criterion_shap_direction},
      {"bootstrap", criterion_bootstrap},
      {"drift metrics", criterion_drift},
      {"semantic stub", criterion_semantic},
      {"end-to-end determinism and runtime", [&] { return criterion_end_to_end(work); }},
  };

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << criteria[k].first << " - " << o.detail
              << " [" << num(seconds_since(t0), 3) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
