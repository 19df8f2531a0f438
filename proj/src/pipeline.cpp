#include "tabguard/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "tabguard/driftfair.hpp"
#include "tabguard/metrics.hpp"

namespace tabguard {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

RunConfig RunConfig::defaults(std::uint64_t master) {
  RunConfig c;
  c.master_seed = master;
  c.synth.seed = master;
  c.split_seed = derive_seed(master, "split");
  c.train.seed = derive_seed(master, "train");
  c.attack.seed = derive_seed(master, "attack");
  c.defense.attack = c.attack;
  c.econ.seed = derive_seed(master, "econ");
  c.explain.seed = derive_seed(master, "explain");
  c.stats.seed = derive_seed(master, "stats");
  return c;
}

namespace {

const json& block(const json& j, const char* key) {
  static const json null_value;
  return j.contains(key) ? j[key] : null_value;
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) {
    if (j.is_null()) return;
    throw ParamError(where + " must be a JSON object");
  }
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; })) {
      throw ParamError("unknown key '" + k + "' in " + where);
    }
  }
}

std::uint64_t file_fingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return 0;
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a64(ss.str());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, std::optional<std::uint64_t> seed_override) {
  reject_unknown(j,
                 {"seed", "data", "checkpoint", "synth", "split", "train", "attack", "defense", "econ", "fairness",
                  "drift", "calibration", "explain", "semantic", "stats", "sweep"},
                 "run config");
  const std::uint64_t master = seed_override ? *seed_override : j.value("seed", std::uint64_t{42});
  RunConfig c = defaults(master);
  try {
    if (const auto& d = block(j, "data"); !d.is_null()) {
      reject_unknown(d, {"csv", "schema"}, "data");
      if (d.contains("csv") && !d["csv"].is_null()) c.data_csv = d["csv"].get<std::string>();
      if (d.contains("schema") && !d["schema"].is_null()) c.schema_path = d["schema"].get<std::string>();
    }
    if (j.contains("checkpoint") && !j["checkpoint"].is_null()) c.checkpoint = j["checkpoint"].get<std::string>();
    if (const auto& s = block(j, "synth"); !s.is_null()) {
      reject_unknown(s, {"n", "d_numeric", "d_categorical", "default_rate", "seed"}, "synth");
      c.synth.n = s.value("n", c.synth.n);
      c.synth.d_numeric = s.value("d_numeric", c.synth.d_numeric);
      c.synth.d_categorical = s.value("d_categorical", c.synth.d_categorical);
      c.synth.default_rate = s.value("default_rate", c.synth.default_rate);
      c.synth.seed = s.value("seed", c.synth.seed);
    }
    if (const auto& s = block(j, "split"); !s.is_null()) {
      reject_unknown(s, {"ratios", "seed"}, "split");
      if (s.contains("ratios")) {
        const auto r = s["ratios"].get<std::vector<double>>();
        if (r.size() != 3) throw ParamError("split.ratios must hold three values");
        c.split_ratios = {r[0], r[1], r[2]};
      }
      c.split_seed = s.value("seed", c.split_seed);
    }
    if (const auto& t = block(j, "train"); !t.is_null()) {
      const std::uint64_t derived = c.train.seed;
      c.train = TrainConfig::from_json(t);
      if (!t.contains("seed")) c.train.seed = derived;
    }
    c.train.validate();
    c.attack = AttackConfig::from_json(block(j, "attack"), c.attack);
    c.defense = DefenseConfig::from_json(block(j, "defense"), c.attack);
    if (const auto& e = block(j, "econ"); !e.is_null()) {
      c.econ = EconConfig::from_json(e, c.econ);
      c.econ_bootstrap_sims = e.value("bootstrap_sims", c.econ_bootstrap_sims);
    }
    if (const auto& f = block(j, "fairness"); !f.is_null()) c.fairness_tau = f.value("tau", c.fairness_tau);
    if (const auto& d = block(j, "drift"); !d.is_null()) c.drift_bins = d.value("bins", c.drift_bins);
    if (const auto& d = block(j, "calibration"); !d.is_null()) c.ece_bins = d.value("bins", c.ece_bins);
    if (const auto& e = block(j, "explain"); !e.is_null()) {
      reject_unknown(e, {"n_instances", "n_coalitions", "background_size", "sweep_instances", "seed"}, "explain");
      c.explain.n_instances = e.value("n_instances", c.explain.n_instances);
      c.explain.n_coalitions = e.value("n_coalitions", c.explain.n_coalitions);
      c.explain.background_size = e.value("background_size", c.explain.background_size);
      c.explain.sweep_instances = e.value("sweep_instances", c.explain.sweep_instances);
      c.explain.seed = e.value("seed", c.explain.seed);
      if (c.explain.background_size < 10) throw ParamError("explain.background_size must be at least 10");
    }
    c.semantic = SemanticConfig::from_json(block(j, "semantic"));
    c.stats = BootstrapConfig::from_json(block(j, "stats"), c.stats);
    if (const auto& s = block(j, "sweep"); !s.is_null()) {
      if (s.contains("epsilons")) c.sweep_epsilons = s["epsilons"].get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw ParamError(std::string("invalid run config: ") + e.what());
  }
  if (!(c.fairness_tau >= 0.0 && c.fairness_tau <= 1.0)) throw ParamError("fairness.tau must lie in [0, 1]");
  if (c.drift_bins < 2) throw ParamError("drift.bins must be at least 2");
  if (c.ece_bins < 1) throw ParamError("calibration.bins must be at least 1");
  return c;
}

ojson RunConfig::to_json() const {
  auto base = [](const std::optional<std::filesystem::path>& p) {
    return p ? ojson(p->filename().string()) : ojson(nullptr);
  };
  ojson j;
  j["seed"] = master_seed;
  j["data"] = ojson{{"csv", base(data_csv)}, {"schema", base(schema_path)}};
  j["checkpoint"] = base(checkpoint);
  j["synth"] = ojson{{"n", synth.n},
                     {"d_numeric", synth.d_numeric},
                     {"d_categorical", synth.d_categorical},
                     {"default_rate", synth.default_rate},
                     {"seed", synth.seed}};
  j["split"] = ojson{{"ratios", split_ratios}, {"seed", split_seed}};
  j["train"] = train.to_json();
  j["attack"] = attack.to_json();
  j["defense"] = defense.to_json();
  j["econ"] = econ.to_json();
  j["econ"]["bootstrap_sims"] = econ_bootstrap_sims;
  j["fairness"] = ojson{{"tau", fairness_tau}};
  j["drift"] = ojson{{"bins", drift_bins}};
  j["calibration"] = ojson{{"bins", ece_bins}};
  j["explain"] = ojson{{"n_instances", explain.n_instances},
                       {"n_coalitions", explain.n_coalitions},
                       {"background_size", explain.background_size},
                       {"sweep_instances", explain.sweep_instances},
                       {"seed", explain.seed}};
  j["semantic"] = semantic.to_json();
  j["stats"] = stats.to_json();
  j["sweep"] = ojson{{"epsilons", sweep_epsilons}};
  return j;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path, std::optional<std::uint64_t> seed_override) {
  if (!path) return RunConfig::from_json(json::object(), seed_override);
  std::ifstream in(*path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path->string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParamError("config " + path->string() + " is not valid JSON: " + e.what());
  }
  return RunConfig::from_json(j, seed_override);
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

PreparedData prepare_data(const RunConfig& cfg, const Preprocessor* fitted) {
  PreparedData d;
  RawTable raw;
  if (cfg.data_csv) {
    if (!cfg.schema_path) throw ParamError("data.csv given without data.schema");
    d.schema = load_schema(*cfg.schema_path);
    std::vector<std::string> aux;
    if (!cfg.econ.lgd_column.empty()) aux.push_back(cfg.econ.lgd_column);
    if (!cfg.econ.ead_column.empty()) aux.push_back(cfg.econ.ead_column);
    raw = load_csv(*cfg.data_csv, d.schema, aux);
  } else {
    auto synth = generate_synthetic_credit(cfg.synth.n, cfg.synth.d_numeric, cfg.synth.d_categorical,
                                           cfg.synth.default_rate, cfg.synth.seed);
    d.schema = std::move(synth.schema);
    raw = std::move(synth.table);
  }
  d.raw = normalize_target(raw, d.schema);
  const Labels labels = d.raw.labels(d.schema);
  d.splits = stratified_split(labels, cfg.split_ratios, cfg.split_seed);

  const RawTable train_rows = d.raw.select_rows(d.splits.train);
  const RawTable val_rows = d.raw.select_rows(d.splits.validation);
  const RawTable test_rows = d.raw.select_rows(d.splits.test);
  d.pre = fitted ? *fitted : fit_preprocessor(train_rows, d.schema);
  d.warnings = d.pre.warnings();
  d.train = d.pre.transform(train_rows, d.schema);
  d.validation = d.pre.transform(val_rows, d.schema);
  d.test = d.pre.transform(test_rows, d.schema);

  if (!d.schema.ids.empty()) {
    d.test_ids = test_rows.string_column(d.schema.ids.front());
  } else {
    for (std::size_t r : d.splits.test) d.test_ids.push_back(std::to_string(r));
  }
  if (const auto s = d.schema.sensitive_feature()) {
    const FeatureSpec& spec = d.schema.features[*s];
    d.sensitive_feature = spec.name;
    const RawTable cleaned = apply_cleaning(test_rows, d.schema, d.pre.cleaning());
    if (spec.kind == FeatureKind::Categorical) {
      d.test_groups = cleaned.string_column(spec.name);
    } else {
      for (double v : cleaned.numeric_column(spec.name, 0.0)) d.test_groups.push_back(format_sig(v, 6));
    }
  }
  const std::size_t n = d.splits.test.size();
  d.test_book = ExposureBook::uniform(n, cfg.econ.lgd_default, cfg.econ.ead_default);
  if (!cfg.econ.lgd_column.empty()) d.test_book.lgd = test_rows.numeric_column(cfg.econ.lgd_column, cfg.econ.lgd_default);
  if (!cfg.econ.ead_column.empty()) d.test_book.ead = test_rows.numeric_column(cfg.econ.ead_column, cfg.econ.ead_default);
  d.test_book.validate(n);
  return d;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

std::string to_string(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::Baseline: return "baseline";
    case TrainingMode::PgdAdversarial: return "pgd_adv";
    case TrainingMode::Noise: return "noise";
  }
  return "baseline";
}

TrainingMode training_mode_from_string(const std::string& text) {
  if (text == "baseline") return TrainingMode::Baseline;
  if (text == "pgd_adv" || text == "pgd_adv_training") return TrainingMode::PgdAdversarial;
  if (text == "noise" || text == "noise_regularized") return TrainingMode::Noise;
  throw ParamError("unknown training mode '" + text + "' (expected baseline, pgd_adv or noise)");
}

MlpCheckpoint train_model(const RunConfig& cfg, const PreparedData& data, TrainingMode mode) {
  MlpCheckpoint ckpt;
  switch (mode) {
    case TrainingMode::Baseline:
      ckpt = train(data.train, data.validation, cfg.train);
      break;
    case TrainingMode::PgdAdversarial: {
      DefenseConfig d = cfg.defense;
      d.mode = DefenseMode::PgdAdversarialTraining;
      const DomainProjector projector = DomainProjector::from_schema(data.schema, data.pre);
      ckpt = adversarial_train(data.train, data.validation, cfg.train, d, &projector);
      break;
    }
    case TrainingMode::Noise: {
      DefenseConfig d = cfg.defense;
      d.mode = DefenseMode::NoiseRegularized;
      ckpt = noise_regularized_train(data.train, data.validation, cfg.train, d);
      break;
    }
  }
  ckpt.preprocessor = data.pre;
  ckpt.schema_fingerprint = data.schema.fingerprint();
  return ckpt;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::vector<double> column(const Matrix& X, std::size_t c) {
  const auto col = X.col(static_cast<Eigen::Index>(c));
  return std::vector<double>(col.data(), col.data() + col.size());
}

void note(const PipelineLog& log, const std::string& stage, const std::string& msg, ojson fields = ojson::object()) {
  if (log) log(stage, msg, fields);
}

}  // namespace

ScenarioBlock score_scenario(const std::string& name, const Vector& scores, const Labels& y, const RunConfig& cfg,
                             const PreparedData& data, const Matrix* X, const Matrix* X_clean,
                             const Vector* clean_scores) {
  ScenarioBlock b;
  b.scenario = name;
  const ScoredSet s(scores, y, name);
  b.n = s.size();
  b.positives = s.positives();
  b.discrimination = {auroc(s), ks_stat(s), gini(s), accuracy(s, 0.5)};
  const EceResult e = ece(s, cfg.ece_bins);
  b.calibration = {e.ece, brier(s), e.reliability};

  const std::vector<double> pd = s.scores;
  auto& econ = b.economic;
  econ.expected_loss = expected_loss(pd, data.test_book).portfolio;
  const LossDistribution dist = simulate_losses(pd, data.test_book, cfg.econ.n_sims, cfg.econ.seed);
  econ.alpha = cfg.econ.alpha;
  econ.n_sims = cfg.econ.n_sims;
  econ.var = var(dist, cfg.econ.alpha);
  econ.es = es(dist, cfg.econ.alpha);
  econ.loss_mean = dist.mean();
  econ.loss_std = dist.stddev();
  econ.cost = {cfg.econ.cost_fp, cfg.econ.cost_fn};
  econ.cost_curve = cost_curve(s, econ.cost);
  econ.bayes_tau = bayes_threshold(econ.cost);
  econ.confusion = economic_confusion(s, econ.bayes_tau, econ.cost, data.test_book);

  if (clean_scores && X && X_clean) {
    DriftReport drift;
    const auto base = to_std(*clean_scores);
    drift.score_edges = psi_edges(base, cfg.drift_bins);
    drift.score = {"score", psi_with_edges(base, pd, drift.score_edges), ks_distance(base, pd), wasserstein1(base, pd)};
    const DomainProjector projector = DomainProjector::from_schema(data.schema, data.pre);
    for (std::size_t c = 0; c < data.pre.dimension(); ++c) {
      const ColumnInfo& col = data.pre.columns()[c];
      if (col.kind != FeatureKind::Numeric || projector.immutable[c]) continue;
      const auto a = column(*X_clean, c), bcol = column(*X, c);
      drift.features.push_back({col.feature, psi(a, bcol, cfg.drift_bins), ks_distance(a, bcol), wasserstein1(a, bcol)});
    }
    b.drift = std::move(drift);
  }

  if (data.test_groups.empty()) {
    b.fairness_null_reason = "no_sensitive_feature";
  } else {
    try {
      b.fairness = fairness_report(data.sensitive_feature, pd, y, data.test_groups, cfg.fairness_tau);
    } catch (const MetricError& err) {
      b.fairness_null_reason = std::string("undefined: ") + err.what();
    }
  }
  b.cap = cap_curve(s);
  return b;
}

namespace {

struct ShapContext {
  Matrix background;
  FeatureGroups groups;
  std::uint64_t seed;
};

ShapContext shap_context(const RunConfig& cfg, const PreparedData& data) {
  return {sample_background(data.train.X, cfg.explain.background_size, derive_seed(cfg.explain.seed, "background")),
          data.pre.feature_groups(), derive_seed(cfg.explain.seed, "shap")};
}

std::vector<std::string> stability_row_ids(const StabilityStats& st, const PreparedData& data) {
  std::vector<std::string> ids;
  for (std::size_t r : st.rows) ids.push_back(data.test_ids[r]);
  return ids;
}

SriBlock run_semantic(const RunConfig& cfg, const PreparedData& data, const StabilityBlock& shap, const Matrix& X,
                      const Matrix& X_adv, const std::string& scenario, const PipelineLog& log) {
  std::vector<ExplanationCase> clean, adv;
  const std::size_t n = std::min(cfg.semantic.n_instances, shap.stats.rows.size());
  for (std::size_t k = 0; k < n; ++k) {
    const auto r = static_cast<Eigen::Index>(shap.stats.rows[k]);
    const auto& a = shap.stats.clean[k];
    const auto& b = shap.stats.adversarial[k];
    clean.push_back(make_case(shap.row_ids[k], "clean", a.prediction, data.pre.features(), data.pre.decode_row(X.row(r)),
                              to_std(a.values), cfg.semantic.top_k));
    adv.push_back(make_case(shap.row_ids[k], scenario, b.prediction, data.pre.features(),
                            data.pre.decode_row(X_adv.row(r)), to_std(b.values), cfg.semantic.top_k));
  }
  SriBlock out;
  out.scenario = scenario;
  LogSink sink;
  if (log) sink = [&log](const std::string& line) { log("semantic", line, ojson::object()); };
  if (cfg.semantic.provider == "live") {
    try {
      auto provider = make_provider(cfg.semantic, sink);
      out.result = sri(clean, adv, *provider, cfg.semantic.max_in_flight);
      return out;
    } catch (const ProviderError& err) {
      out.provider_note = std::string("live provider failed, stub used: ") + err.what();
      note(log, "semantic", out.provider_note);
    }
  }
  StubProvider stub;
  out.result = sri(clean, adv, stub, 1);
  if (!out.provider_note.empty()) out.result.provider = "stub_fallback";
  return out;
}

}  // namespace

Evaluation evaluate(const RunConfig& cfg, const MlpCheckpoint& ckpt, const PreparedData& data,
                    const EvaluateOptions& opts, const PipelineLog& log) {
  Evaluation ev;
  auto& in = ev.inputs;
  in.metadata = run_metadata(cfg, data, &ckpt);
  in.warnings = data.warnings;
  if (ckpt.schema_fingerprint != data.schema.fingerprint()) {
    in.warnings.push_back("checkpoint schema fingerprint " + ckpt.schema_fingerprint +
                          " does not match the data schema " + data.schema.fingerprint());
  }
  in.model_name = ckpt.training_mode;
  in.training_mode = ckpt.training_mode;

  const Mlp model(ckpt.params);
  const Matrix& X = data.test.X;
  const Labels& y = data.test.y;
  const DomainProjector projector = DomainProjector::from_schema(data.schema, ckpt.preprocessor);
  AttackConfig attack = cfg.attack;
  attack.threads = opts.threads;

  const Vector clean_scores = model.predict_proba(X);
  ev.scores["clean"] = clean_scores;
  in.scenarios.push_back(score_scenario("clean", clean_scores, y, cfg, data, nullptr, nullptr, nullptr));
  note(log, "evaluate", "scored scenario", ojson{{"scenario", "clean"}});

  for (const std::string name : {"fgsm", "pgd"}) {
    if (!opts.scenarios.count(name)) continue;
    Matrix adv = name == "fgsm" ? fgsm(model, X, y, attack, &projector) : pgd(model, X, y, attack, &projector);
    const Vector scores = model.predict_proba(adv);
    in.scenarios.push_back(score_scenario(name, scores, y, cfg, data, &adv, &X, &clean_scores));
    ev.scores[name] = scores;
    ev.adversarial[name] = std::move(adv);
    note(log, "evaluate", "scored scenario", ojson{{"scenario", name}});
  }

  const bool any_attack = !ev.adversarial.empty();
  if (!opts.shap) {
    in.skipped_reasons["shap_stability"] = "disabled";
  } else if (!any_attack) {
    in.skipped_reasons["shap_stability"] = "requires_attack_scenario";
  } else {
    const ShapContext ctx = shap_context(cfg, data);
    const PredictFn f = model.probability_fn();
    for (const auto& [name, adv] : ev.adversarial) {
      StabilityBlock b;
      b.scenario = name;
      b.stats = stability_report(f, X, adv, ctx.background, ctx.groups, cfg.explain.n_instances,
                                 cfg.explain.n_coalitions, ctx.seed, opts.threads);
      b.feature_names = data.pre.features();
      b.row_ids = stability_row_ids(b.stats, data);
      in.shap.push_back(std::move(b));
      note(log, "explain", "shap stability", ojson{{"scenario", name}, {"cosine_mean", in.shap.back().stats.cosine_summary.mean}});
    }
  }

  if (!opts.semantic) {
    in.skipped_reasons["semantic"] = "disabled";
  } else if (in.shap.empty()) {
    in.skipped_reasons["semantic"] = "requires_shap";
  } else {
    for (const auto& b : in.shap) {
      if (b.stats.rows.empty()) {
        in.warnings.push_back("semantic: no attributed instances for scenario " + b.scenario);
        continue;
      }
      in.semantic.push_back(run_semantic(cfg, data, b, X, ev.adversarial.at(b.scenario), b.scenario, log));
    }
    if (in.semantic.empty()) in.skipped_reasons["semantic"] = "no_attributed_instances";
  }

  if (!opts.bootstrap) {
    in.skipped_reasons["bootstrap"] = "disabled";
  } else if (!any_attack) {
    in.skipped_reasons["bootstrap"] = "requires_attack_scenario";
  } else {
    const std::string other = ev.scores.count("pgd") ? "pgd" : "fgsm";
    const ScoredSet clean(clean_scores, y, "clean");
    const ScoredSet attacked(ev.scores.at(other), y, other);
    const ExposureBook& book = data.test_book;
    BootstrapConfig bc = cfg.stats;
    bc.threads = opts.threads;

    auto auc_of = [](const ScoredSet& s) {
      return IndexMetric([&s](std::span<const std::size_t> rows) { return auroc(s.subset(rows)); });
    };
    auto el_of = [&book](const ScoredSet& s) {
      return IndexMetric([&s, &book](std::span<const std::size_t> rows) {
        double total = 0.0;
        for (std::size_t r : rows) total += s.scores[r] * book.lgd[r] * book.ead[r];
        return total;
      });
    };
    const std::size_t sims = cfg.econ_bootstrap_sims;
    const std::uint64_t econ_seed = cfg.econ.seed;
    const double alpha = cfg.econ.alpha;
    // VaR and ES of a replicate come from one simulation; the ES pass reads
    // the value cached by the VaR pass for the same resample.
    struct TailCache {
      std::mutex mu;
      std::unordered_map<std::uint64_t, double> es;
    };
    auto tail_of = [&book, sims, econ_seed, alpha](const ScoredSet& s, bool shortfall,
                                                  std::shared_ptr<TailCache> cache) {
      return IndexMetric([&s, &book, sims, econ_seed, alpha, shortfall, cache](std::span<const std::size_t> rows) {
        const std::uint64_t key = fnv1a64(
            std::string_view(reinterpret_cast<const char*>(rows.data()), rows.size() * sizeof(std::size_t)));
        if (shortfall) {
          std::lock_guard lock(cache->mu);
          if (auto it = cache->es.find(key); it != cache->es.end()) return it->second;
        }
        std::vector<double> pd;
        ExposureBook sub;
        for (std::size_t r : rows) {
          pd.push_back(s.scores[r]);
          sub.lgd.push_back(book.lgd[r]);
          sub.ead.push_back(book.ead[r]);
        }
        const LossDistribution dist = simulate_losses(pd, sub, sims, econ_seed, 1);
        const double tail = es(dist, alpha);
        {
          std::lock_guard lock(cache->mu);
          cache->es[key] = tail;
        }
        return shortfall ? tail : var(dist, alpha);
      });
    };
    auto cache_clean = std::make_shared<TailCache>(), cache_attacked = std::make_shared<TailCache>();
    const std::size_t n = clean.size();
    in.bootstrap.push_back({"auroc", "clean", other, paired_bootstrap(auc_of(clean), auc_of(attacked), n, bc)});
    in.bootstrap.push_back({"el", "clean", other, paired_bootstrap(el_of(clean), el_of(attacked), n, bc)});
    in.bootstrap.push_back(
        {"var", "clean", other, paired_bootstrap(tail_of(clean, false, cache_clean), tail_of(attacked, false, cache_attacked), n, bc)});
    in.bootstrap.push_back(
        {"es", "clean", other, paired_bootstrap(tail_of(clean, true, cache_clean), tail_of(attacked, true, cache_attacked), n, bc)});
    note(log, "stats", "bootstrap intervals", ojson{{"replicates", bc.replicates}});
  }
  in.skipped_reasons["epsilon_sweep"] = "not_run";
  in.skipped_reasons["comparison"] = "not_run";
  return ev;
}

std::vector<SweepRow> epsilon_sweep(const RunConfig& cfg, const MlpCheckpoint& ckpt, const PreparedData& data,
                                    std::vector<double> epsilons, bool shap, bool semantic,
                                    std::vector<std::string>* warnings, const PipelineLog& log) {
  if (std::find(epsilons.begin(), epsilons.end(), 0.0) == epsilons.end()) {
    throw ParamError("epsilon sweep must include 0");
  }
  for (double e : epsilons) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw ParamError("epsilon values must be finite and >= 0");
  }
  const std::size_t before = epsilons.size();
  std::sort(epsilons.begin(), epsilons.end());
  epsilons.erase(std::unique(epsilons.begin(), epsilons.end()), epsilons.end());
  if (epsilons.size() != before) {
    const std::string msg = "removed " + std::to_string(before - epsilons.size()) + " duplicate epsilon value(s)";
    if (warnings) warnings->push_back(msg);
    note(log, "sweep", msg);
  }

  const Mlp model(ckpt.params);
  const Matrix& X = data.test.X;
  const Labels& y = data.test.y;
  const DomainProjector projector = DomainProjector::from_schema(data.schema, ckpt.preprocessor);
  std::optional<ShapContext> ctx;
  if (shap) ctx = shap_context(cfg, data);

  std::vector<SweepRow> rows;
  for (double eps : epsilons) {
    AttackConfig attack = cfg.attack;
    attack.epsilon = eps;
    const Matrix adv = pgd(model, X, y, attack, &projector);
    const Vector scores = model.predict_proba(adv);
    SweepRow row;
    row.epsilon = eps;
    row.pgd_auroc = auroc(ScoredSet(scores, y, "pgd"));
    row.pgd_el = expected_loss(to_std(scores), data.test_book).portfolio;
    if (ctx) {
      StabilityBlock b;
      b.scenario = "pgd";
      b.stats = stability_report(model.probability_fn(), X, adv, ctx->background, ctx->groups,
                                 cfg.explain.sweep_instances, cfg.explain.n_coalitions, ctx->seed);
      b.row_ids = stability_row_ids(b.stats, data);
      row.shap_cosine = b.stats.cosine_summary.mean;
      if (semantic && !b.stats.rows.empty()) row.sri = run_semantic(cfg, data, b, X, adv, "pgd", log).result.sri;
    }
    note(log, "sweep", "epsilon evaluated", ojson{{"epsilon", eps}, {"pgd_auroc", row.pgd_auroc}});
    rows.push_back(row);
  }
  return rows;
}

std::vector<ComparisonRow> defend_compare(const RunConfig& cfg, const PreparedData& data,
                                          std::vector<MlpCheckpoint>* models, const PipelineLog& log) {
  std::vector<ComparisonRow> rows;
  const DomainProjector projector = DomainProjector::from_schema(data.schema, data.pre);
  for (TrainingMode mode : {TrainingMode::Baseline, TrainingMode::PgdAdversarial, TrainingMode::Noise}) {
    MlpCheckpoint ckpt = train_model(cfg, data, mode);
    const Mlp model(ckpt.params);
    const Matrix& X = data.test.X;
    const Labels& y = data.test.y;
    const Vector clean = model.predict_proba(X);
    const Vector attacked = model.predict_proba(pgd(model, X, y, cfg.attack, &projector));
    const ScoredSet sa(attacked, y, "pgd");
    ComparisonRow row;
    row.model = to_string(mode);
    row.clean_auroc = auroc(ScoredSet(clean, y, "clean"));
    row.pgd_auroc = auroc(sa);
    row.pgd_ece = ece(sa, cfg.ece_bins).ece;
    row.pgd_el = expected_loss(to_std(attacked), data.test_book).portfolio;
    note(log, "defend-compare", "model evaluated",
         ojson{{"model", row.model}, {"clean_auroc", row.clean_auroc}, {"pgd_auroc", row.pgd_auroc}});
    rows.push_back(row);
    if (models) models->push_back(std::move(ckpt));
  }
  return rows;
}

ojson run_metadata(const RunConfig& cfg, const PreparedData& data, const MlpCheckpoint* ckpt) {
  ojson m;
  m["tool"] = "tabguard";
  m["tool_version"] = "1.0.0";
  m["master_seed"] = cfg.master_seed;
  m["seeds"] = ojson{{"synth", cfg.synth.seed},  {"split", cfg.split_seed},  {"train", cfg.train.seed},
                     {"attack", cfg.attack.seed}, {"econ", cfg.econ.seed},     {"explain", cfg.explain.seed},
                     {"stats", cfg.stats.seed}};
  ojson source;
  if (cfg.data_csv) {
    source["kind"] = "csv";
    source["file"] = cfg.data_csv->filename().string();
    source["fnv1a64"] = hex64(file_fingerprint(*cfg.data_csv));
  } else {
    source["kind"] = "synthetic";
  }
  m["data"] = ojson{{"source", source},
                    {"rows", data.raw.rows},
                    {"train", data.splits.train.size()},
                    {"validation", data.splits.validation.size()},
                    {"test", data.splits.test.size()},
                    {"features", data.pre.features().size()},
                    {"columns", data.pre.dimension()},
                    {"sensitive_feature", data.sensitive_feature.empty() ? ojson(nullptr) : ojson(data.sensitive_feature)}};
  m["schema_fingerprint"] = data.schema.fingerprint();
  if (ckpt) {
    m["checkpoint"] = ojson{{"training_mode", ckpt->training_mode},
                            {"best_epoch", ckpt->best_epoch},
                            {"best_val_auroc", ckpt->best_val_auroc},
                            {"schema_fingerprint", ckpt->schema_fingerprint},
                            {"params_fnv1a64", hex64(fnv1a64(std::string_view(
                                                   reinterpret_cast<const char*>(ckpt->params.flat().data()),
                                                   static_cast<std::size_t>(ckpt->params.flat().size()) * sizeof(double))))}};
  } else {
    m["checkpoint"] = nullptr;
  }
  m["config"] = cfg.to_json();
  return m;
}

}  // namespace tabguard
