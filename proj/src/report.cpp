#include "tabguard/report.hpp"

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace tabguard {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

ojson num(double v) { return ojson(v); }  // non-finite values are nulled in a later pass

ojson to_json(const DiscriminationBlock& d) {
  return ojson{{"auroc", num(d.auroc)}, {"ks", num(d.ks)}, {"gini", num(d.gini)}, {"accuracy", num(d.accuracy)}};
}

ojson to_json(const CalibrationBlock& c) {
  ojson bins = ojson::array();
  for (const auto& b : c.reliability.bins) {
    bins.push_back(ojson{{"lower", b.lower},
                         {"upper", b.upper},
                         {"count", b.count},
                         {"confidence", num(b.confidence)},
                         {"accuracy", num(b.accuracy)}});
  }
  return ojson{{"ece", num(c.ece)}, {"brier", num(c.brier)}, {"bins", c.reliability.bins.size()},
               {"reliability", std::move(bins)}};
}

ojson to_json(const EconomicConfusion& c) {
  return ojson{{"tau", c.tau},
               {"tp", c.tp},
               {"fp", c.fp},
               {"tn", c.tn},
               {"fn", c.fn},
               {"misclassification_cost", num(c.misclassification_cost)},
               {"fn_expected_loss", num(c.fn_expected_loss)}};
}

ojson to_json(const EconomicBlock& e) {
  ojson points = ojson::array();
  for (const auto& p : e.cost_curve.points) {
    points.push_back(ojson{{"tau", p.tau}, {"fp", p.fp}, {"fn", p.fn}, {"cost", num(p.cost)}});
  }
  ojson j;
  j["expected_loss"] = num(e.expected_loss);
  j["var"] = num(e.var);
  j["es"] = num(e.es);
  j["alpha"] = e.alpha;
  j["n_sims"] = e.n_sims;
  j["simulated_mean"] = num(e.loss_mean);
  j["simulated_std"] = num(e.loss_std);
  j["cost_fp"] = e.cost.c_fp;
  j["cost_fn"] = e.cost.c_fn;
  j["bayes_threshold"] = num(e.bayes_tau);
  j["cost_curve"] = ojson{{"best_tau", e.cost_curve.best_tau},
                          {"best_cost", num(e.cost_curve.best_cost)},
                          {"points", std::move(points)}};
  j["confusion"] = to_json(e.confusion);
  return j;
}

ojson to_json(const FeatureDrift& f) {
  return ojson{{"feature", f.feature}, {"psi", num(f.psi)}, {"ks", num(f.ks)}, {"wasserstein", num(f.wasserstein)}};
}

ojson to_json(const DriftReport& d) {
  ojson features = ojson::array();
  for (const auto& f : d.features) features.push_back(to_json(f));
  return ojson{{"score", to_json(d.score)}, {"score_edges", d.score_edges}, {"features", std::move(features)}};
}

ojson to_json(const FairnessReport& f) {
  ojson groups = ojson::array();
  for (const auto& g : f.groups) {
    groups.push_back(ojson{{"group", g.group},
                           {"count", g.count},
                           {"positives", g.positives},
                           {"positive_rate", num(g.positive_rate)},
                           {"tpr", num(g.tpr)}});
  }
  ojson dp = ojson::object(), eo = ojson::object();
  for (const auto& [k, v] : f.demographic_parity) dp[k] = num(v);
  for (const auto& [k, v] : f.equal_opportunity) eo[k] = num(v);
  return ojson{{"attribute", f.attribute},
               {"tau", f.tau},
               {"reference_group", f.reference_group},
               {"groups", std::move(groups)},
               {"demographic_parity", std::move(dp)},
               {"equal_opportunity", std::move(eo)}};
}

ojson summary_json(const Summary& s) {
  return ojson{{"mean", num(s.mean)}, {"median", num(s.median)}, {"p5", num(s.p5)}};
}

ojson attribution_json(const Attribution& a) {
  return ojson{{"base", num(a.base)},
               {"prediction", num(a.prediction)},
               {"values", std::vector<double>(a.values.data(), a.values.data() + a.values.size())}};
}

ojson to_json(const StabilityBlock& b) {
  const auto& s = b.stats;
  ojson inst = ojson::array();
  for (std::size_t k = 0; k < s.rows.size(); ++k) {
    inst.push_back(ojson{{"row", s.rows[k]},
                         {"row_id", k < b.row_ids.size() ? b.row_ids[k] : std::to_string(s.rows[k])},
                         {"cosine", num(s.cosine[k])},
                         {"spearman", num(s.spearman[k])},
                         {"l2", num(s.l2[k])},
                         {"clean", attribution_json(s.clean[k])},
                         {"adversarial", attribution_json(s.adversarial[k])}});
  }
  return ojson{{"n_instances", s.rows.size() + s.failures},
               {"failures", s.failures},
               {"failure_messages", s.failure_messages},
               {"cosine", summary_json(s.cosine_summary)},
               {"spearman", summary_json(s.spearman_summary)},
               {"l2", summary_json(s.l2_summary)},
               {"feature_names", b.feature_names},
               {"instances", std::move(inst)}};
}

ojson to_json(const SriBlock& b) {
  ojson inst = ojson::array();
  for (const auto& p : b.result.pairs) {
    ojson i{{"row_id", p.row_id}};
    if (p.error.empty()) {
      i["plausibility"] = num(p.score.plausibility);
      i["stability"] = num(p.score.stability);
      i["consistency"] = num(p.score.consistency);
      i["composite"] = num(p.score.composite);
      i["clean_text"] = p.clean_text;
      i["adversarial_text"] = p.adv_text;
      i["error"] = nullptr;
    } else {
      i["error"] = p.error;
    }
    inst.push_back(std::move(i));
  }
  return ojson{{"provider", b.result.provider},
               {"provider_note", b.provider_note.empty() ? ojson(nullptr) : ojson(b.provider_note)},
               {"sri", num(b.result.sri)},
               {"failures", b.result.failures},
               {"instances", std::move(inst)}};
}

ojson ci_json(const BootstrapCI& c) {
  return ojson{{"point", num(c.point)}, {"lower", num(c.lower)}, {"upper", num(c.upper)}, {"discarded", c.discarded}};
}

ojson to_json(const BootstrapEntry& e) {
  return ojson{{"metric", e.metric},
               {"scenario_a", e.scenario_a},
               {"scenario_b", e.scenario_b},
               {"level", e.ci.a.level},
               {"replicates", e.ci.a.replicates},
               {"seed", e.ci.a.seed},
               {"a", ci_json(e.ci.a)},
               {"b", ci_json(e.ci.b)},
               {"difference", ci_json(e.ci.difference)},
               {"separated", ci_separated(e.ci.a, e.ci.b)}};
}

ojson to_json(const ScenarioBlock& s) {
  ojson j;
  j["n"] = s.n;
  j["positives"] = s.positives;
  j["discrimination"] = to_json(s.discrimination);
  j["calibration"] = to_json(s.calibration);
  j["economic"] = to_json(s.economic);
  j["drift"] = s.drift ? to_json(*s.drift) : ojson(nullptr);
  j["fairness"] = s.fairness ? to_json(*s.fairness) : ojson(nullptr);
  ojson cap = ojson::array();
  for (const auto& p : s.cap) cap.push_back(ojson::array({p.population_fraction, p.captured_fraction}));
  j["cap_curve"] = std::move(cap);
  return j;
}

std::string escape_pointer_token(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

void null_non_finite(ojson& j, const std::string& path, ojson& reasons) {
  if (j.is_number_float()) {
    if (!std::isfinite(j.get<double>())) {
      j = nullptr;
      reasons[path.empty() ? "/" : path] = "non_finite";
    }
  } else if (j.is_object()) {
    for (auto& [k, v] : j.items()) null_non_finite(v, path + "/" + escape_pointer_token(k), reasons);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) null_non_finite(j[i], path + "/" + std::to_string(i), reasons);
  }
}

std::string reason_for(const ReportInputs& in, const std::string& block) {
  const auto it = in.skipped_reasons.find(block);
  return it == in.skipped_reasons.end() ? "not_run" : it->second;
}

}  // namespace

std::optional<std::string> reproducible_timestamp() {
  const char* env = std::getenv("SOURCE_DATE_EPOCH");
  if (!env || !*env) return std::nullopt;
  char* end = nullptr;
  const long long secs = std::strtoll(env, &end, 10);
  if (*end != '\0' || secs < 0) return std::nullopt;
  const std::time_t t = static_cast<std::time_t>(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

ojson assemble(const ReportInputs& in) {
  const ScenarioBlock* clean = nullptr;
  std::set<std::string> seen;
  for (const auto& s : in.scenarios) {
    if (!seen.insert(s.scenario).second) throw AssemblyError("scenario '" + s.scenario + "' appears twice");
    if (s.scenario == "clean") clean = &s;
  }
  if (!clean) throw AssemblyError("report requires the clean scenario");
  for (const auto& s : in.scenarios) {
    if (s.n != clean->n || s.positives != clean->positives) {
      throw AssemblyError("scenario '" + s.scenario + "' has " + std::to_string(s.n) + " rows, clean has " +
                          std::to_string(clean->n));
    }
    if (s.calibration.reliability.bins.size() != clean->calibration.reliability.bins.size()) {
      throw AssemblyError("scenario '" + s.scenario + "' uses a different reliability binning");
    }
  }

  ojson reasons = ojson::object();
  ojson r;
  r["report_version"] = 1;
  ojson meta = in.metadata.is_null() ? ojson::object() : in.metadata;
  if (const auto ts = reproducible_timestamp()) {
    meta["generated_at"] = *ts;
  } else {
    meta["generated_at"] = nullptr;
    reasons["/metadata/generated_at"] = "source_date_epoch_unset";
  }
  meta["warnings"] = in.warnings;
  r["metadata"] = std::move(meta);
  r["model"] = ojson{{"name", in.model_name}, {"training_mode", in.training_mode}};

  ojson scenarios = ojson::object();
  std::vector<std::string> order = kScenarios;
  for (const auto& s : in.scenarios) {
    if (std::find(order.begin(), order.end(), s.scenario) == order.end()) order.push_back(s.scenario);
  }
  for (const auto& name : order) {
    const auto it = std::find_if(in.scenarios.begin(), in.scenarios.end(),
                                 [&](const ScenarioBlock& s) { return s.scenario == name; });
    const std::string path = "/scenarios/" + escape_pointer_token(name);
    if (it == in.scenarios.end()) {
      scenarios[name] = nullptr;
      reasons[path] = reason_for(in, "scenario:" + name);
      continue;
    }
    scenarios[name] = to_json(*it);
    if (!it->drift) reasons[path + "/drift"] = name == "clean" ? "reference_scenario" : "not_run";
    if (!it->fairness) reasons[path + "/fairness"] = it->fairness_null_reason.empty() ? "not_run" : it->fairness_null_reason;
  }
  r["scenarios"] = std::move(scenarios);

  auto keyed_block = [&](const char* key, const auto& blocks) {
    if (blocks.empty()) {
      r[key] = nullptr;
      reasons[std::string("/") + key] = reason_for(in, key);
      return;
    }
    ojson obj = ojson::object();
    for (const auto& b : blocks) obj[b.scenario] = to_json(b);
    r[key] = std::move(obj);
  };
  keyed_block("shap_stability", in.shap);
  keyed_block("semantic", in.semantic);

  if (in.bootstrap.empty()) {
    r["bootstrap"] = nullptr;
    reasons["/bootstrap"] = reason_for(in, "bootstrap");
  } else {
    ojson arr = ojson::array();
    for (const auto& e : in.bootstrap) arr.push_back(to_json(e));
    r["bootstrap"] = std::move(arr);
  }

  if (in.sweep.empty()) {
    r["epsilon_sweep"] = nullptr;
    reasons["/epsilon_sweep"] = reason_for(in, "epsilon_sweep");
  } else {
    ojson arr = ojson::array();
    for (std::size_t k = 0; k < in.sweep.size(); ++k) {
      const auto& row = in.sweep[k];
      const std::string p = "/epsilon_sweep/" + std::to_string(k);
      ojson o{{"epsilon", row.epsilon}, {"pgd_auroc", num(row.pgd_auroc)}, {"pgd_el", num(row.pgd_el)}};
      o["shap_cosine"] = row.shap_cosine ? num(*row.shap_cosine) : ojson(nullptr);
      if (!row.shap_cosine) reasons[p + "/shap_cosine"] = reason_for(in, "shap_stability");
      o["sri"] = row.sri ? num(*row.sri) : ojson(nullptr);
      if (!row.sri) reasons[p + "/sri"] = reason_for(in, "semantic");
      arr.push_back(std::move(o));
    }
    r["epsilon_sweep"] = std::move(arr);
  }

  if (in.comparison.empty()) {
    r["comparison"] = nullptr;
    reasons["/comparison"] = reason_for(in, "comparison");
  } else {
    ojson arr = ojson::array();
    for (const auto& c : in.comparison) {
      arr.push_back(ojson{{"model", c.model},
                          {"clean_auroc", num(c.clean_auroc)},
                          {"pgd_auroc", num(c.pgd_auroc)},
                          {"pgd_ece", num(c.pgd_ece)},
                          {"pgd_el", num(c.pgd_el)}});
    }
    r["comparison"] = std::move(arr);
  }

  null_non_finite(r, "", reasons);
  r["null_reasons"] = std::move(reasons);
  return r;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

void emit_json(const ojson& report, const std::filesystem::path& path) {
  write_text(path, report.dump(2) + "\n");
}

ojson load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open report " + path.string());
  try {
    return ojson::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("report " + path.string() + " is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV tables
// ---------------------------------------------------------------------------

namespace {

std::string cell(const ojson& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number()) return format_sig(v.get<double>(), 6);
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n\r") != std::string::npos) {
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
  return s;
}

class Table {
 public:
  explicit Table(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      text_ += first ? "" : ",";
      text_ += h;
      first = false;
    }
    text_ += "\n";
  }
  void row(std::initializer_list<ojson> cells) {
    bool first = true;
    for (const auto& c : cells) {
      text_ += first ? "" : ",";
      text_ += cell(c);
      first = false;
    }
    text_ += "\n";
  }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

template <class Fn>
void for_each_scenario(const ojson& report, Fn fn) {
  if (!report.contains("scenarios") || !report["scenarios"].is_object()) return;
  for (const auto& [name, block] : report["scenarios"].items()) {
    if (!block.is_null()) fn(name, block);
  }
}

const ojson& field(const ojson& j, const char* key) {
  static const ojson null_value;
  return j.is_object() && j.contains(key) ? j[key] : null_value;
}

}  // namespace

std::string discrimination_csv(const ojson& report) {
  Table t{"scenario", "auroc", "ks", "gini", "accuracy"};
  for_each_scenario(report, [&](const std::string& name, const ojson& s) {
    const auto& d = s["discrimination"];
    t.row({name, d["auroc"], d["ks"], d["gini"], d["accuracy"]});
  });
  return t.str();
}

std::string epsilon_sweep_csv(const ojson& report) {
  Table t{"epsilon", "pgd_auroc", "pgd_el", "shap_cosine", "sri"};
  const auto& sweep = field(report, "epsilon_sweep");
  if (sweep.is_array()) {
    for (const auto& r : sweep) t.row({r["epsilon"], r["pgd_auroc"], r["pgd_el"], r["shap_cosine"], r["sri"]});
  }
  return t.str();
}

std::string comparison_csv(const ojson& report) {
  Table t{"model", "clean_auroc", "pgd_auroc", "pgd_ece", "pgd_el"};
  const auto& cmp = field(report, "comparison");
  if (cmp.is_array()) {
    for (const auto& r : cmp) t.row({r["model"], r["clean_auroc"], r["pgd_auroc"], r["pgd_ece"], r["pgd_el"]});
  }
  return t.str();
}

namespace {

std::string calibration_csv(const ojson& report) {
  Table t{"scenario", "ece", "brier"};
  for_each_scenario(report, [&](const std::string& name, const ojson& s) {
    t.row({name, s["calibration"]["ece"], s["calibration"]["brier"]});
  });
  return t.str();
}

std::string economic_csv(const ojson& report) {
  Table t{"scenario", "expected_loss", "var", "es", "alpha", "n_sims", "bayes_threshold", "best_tau", "best_cost",
          "fn_count", "fn_expected_loss"};
  for_each_scenario(report, [&](const std::string& name, const ojson& s) {
    const auto& e = s["economic"];
    t.row({name, e["expected_loss"], e["var"], e["es"], e["alpha"], e["n_sims"], e["bayes_threshold"],
           e["cost_curve"]["best_tau"], e["cost_curve"]["best_cost"], e["confusion"]["fn"],
           e["confusion"]["fn_expected_loss"]});
  });
  return t.str();
}

std::string cost_curve_csv(const ojson& report) {
  Table t{"scenario", "tau", "fp", "fn", "cost"};
  for_each_scenario(report, [&](const std::string& name, const ojson& s) {
    for (const auto& p : s["economic"]["cost_curve"]["points"]) t.row({name, p["tau"], p["fp"], p["fn"], p["cost"]});
  });
  return t.str();
}

std::string reliability_csv(const ojson& report) {
  Table t{"scenario", "bin", "lower", "upper", "count", "confidence", "accuracy"};
  for_each_scenario(report, [&](const std::string& name, const ojson& s) {
    const auto& bins = s["calibration"]["reliability"];
    for (std::size_t m = 0; m < bins.size(); ++m) {
      const auto& b = bins[m];
      t.row({name, m, b["lower"], b["upper"], b["count"], b["confidence"], b["accuracy"]});
    }
  });
  return t.str();
}

std::string shap_csv(const ojson& report) {
  Table t{"scenario", "row_id", "feature", "clean_shap", "adv_shap"};
  const auto& shap = field(report, "shap_stability");
  if (shap.is_object()) {
    for (const auto& [name, block] : shap.items()) {
      const auto& features = block["feature_names"];
      for (const auto& inst : block["instances"]) {
        const auto& c = inst["clean"]["values"];
        const auto& a = inst["adversarial"]["values"];
        for (std::size_t j = 0; j < features.size(); ++j) t.row({name, inst["row_id"], features[j], c[j], a[j]});
      }
    }
  }
  return t.str();
}

std::string drift_csv(const ojson& report) {
  Table t{"scenario", "feature", "psi", "ks", "wasserstein"};
  for_each_scenario(report, [&](const std::string& name, const ojson& s) {
    const auto& d = s["drift"];
    if (d.is_null()) return;
    t.row({name, "score", d["score"]["psi"], d["score"]["ks"], d["score"]["wasserstein"]});
    for (const auto& f : d["features"]) t.row({name, f["feature"], f["psi"], f["ks"], f["wasserstein"]});
  });
  return t.str();
}

std::string fairness_csv(const ojson& report) {
  Table t{"scenario", "attribute", "comparison", "tau", "demographic_parity_diff", "equal_opportunity_diff"};
  for_each_scenario(report, [&](const std::string& name, const ojson& s) {
    const auto& f = s["fairness"];
    if (f.is_null()) return;
    for (const auto& [k, v] : f["demographic_parity"].items()) {
      t.row({name, f["attribute"], k, f["tau"], v, field(f["equal_opportunity"], k.c_str())});
    }
  });
  return t.str();
}

std::string bootstrap_csv(const ojson& report) {
  Table t{"metric", "scenario", "point", "lower", "upper", "level", "replicates", "discarded", "separated"};
  const auto& boot = field(report, "bootstrap");
  if (boot.is_array()) {
    for (const auto& e : boot) {
      const std::string a = e["scenario_a"].get<std::string>(), b = e["scenario_b"].get<std::string>();
      t.row({e["metric"], a, e["a"]["point"], e["a"]["lower"], e["a"]["upper"], e["level"], e["replicates"],
             e["a"]["discarded"], e["separated"]});
      t.row({e["metric"], b, e["b"]["point"], e["b"]["lower"], e["b"]["upper"], e["level"], e["replicates"],
             e["b"]["discarded"], e["separated"]});
      t.row({e["metric"], a + "-" + b, e["difference"]["point"], e["difference"]["lower"], e["difference"]["upper"],
             e["level"], e["replicates"], e["difference"]["discarded"], e["separated"]});
    }
  }
  return t.str();
}

std::string cap_csv(const ojson& report) {
  Table t{"scenario", "population_fraction", "captured_fraction"};
  for_each_scenario(report, [&](const std::string& name, const ojson& s) {
    for (const auto& p : s["cap_curve"]) t.row({name, p[0], p[1]});
  });
  return t.str();
}

}  // namespace

const std::vector<std::string>& report_csv_files() {
  static const std::vector<std::string> files{
      "discrimination.csv", "calibration.csv", "economic.csv",  "epsilon_sweep.csv",
      "cost_curve.csv",     "reliability_bins.csv", "shap_stability.csv", "drift.csv",
      "fairness.csv",       "bootstrap.csv",  "cap_curve.csv"};
  return files;
}

void emit_csv(const ojson& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "discrimination.csv", discrimination_csv(report));
  write_text(dir / "calibration.csv", calibration_csv(report));
  write_text(dir / "economic.csv", economic_csv(report));
  write_text(dir / "epsilon_sweep.csv", epsilon_sweep_csv(report));
  write_text(dir / "cost_curve.csv", cost_curve_csv(report));
  write_text(dir / "reliability_bins.csv", reliability_csv(report));
  write_text(dir / "shap_stability.csv", shap_csv(report));
  write_text(dir / "drift.csv", drift_csv(report));
  write_text(dir / "fairness.csv", fairness_csv(report));
  write_text(dir / "bootstrap.csv", bootstrap_csv(report));
  write_text(dir / "cap_curve.csv", cap_csv(report));
}

}  // namespace tabguard
