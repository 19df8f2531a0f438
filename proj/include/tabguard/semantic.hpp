#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabguard/common.hpp"

namespace tabguard {

struct CitedFeature {
  std::string name;
  std::string value;  // original units, as decoded by the preprocessor
  double attribution = 0.0;
};

/// What the explainer is told about one prediction. Features are sorted by
/// |attribution| descending. The scenario tag is kept for bookkeeping only
/// and never shown to the provider, so explanations are scored blind.
struct ExplanationCase {
  std::string row_id;
  std::string scenario;
  double probability = 0.0;
  std::vector<CitedFeature> features;
};

/// Top-k players by |attribution| (stable on ties, so lower indices win).
ExplanationCase make_case(std::string row_id, std::string scenario, double probability,
                          const std::vector<std::string>& names, const std::vector<std::string>& values,
                          const std::vector<double>& attributions, std::size_t top_k);

/// Deterministic prompt text; see docs/prompt_template.md.
std::string render_prompt(const ExplanationCase& c);
/// Rubric prompt used by the live provider to score a clean/adversarial pair.
std::string render_rubric_prompt(const std::string& clean_text, const std::string& adv_text);

struct SemanticScore {
  double plausibility = 0.0;
  double stability = 0.0;
  double consistency = 0.0;
  double composite = 0.0;  // mean of the three

  static SemanticScore from_components(double plausibility, double stability, double consistency);
};

/// Lower-cased whitespace-separated tokens.
std::vector<std::string> tokenize(const std::string& text);
double token_jaccard(const std::string& a, const std::string& b);
/// The text after "Primary driver:" on its line, or the first token.
std::string top_cited_feature(const std::string& text);

using LogSink = std::function<void(const std::string&)>;

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  virtual std::string tag() const = 0;
  virtual std::string explain(const ExplanationCase& c, const std::string& prompt) = 0;
  virtual SemanticScore score_pair(const std::string& clean_text, const std::string& adv_text) = 0;
};

/// Offline provider: echoes the case through a fixed template and scores
/// pairs with plausibility 1, token-set Jaccard stability and top-driver
/// agreement as consistency.
class StubProvider final : public LlmProvider {
 public:
  std::string tag() const override { return "stub"; }
  std::string explain(const ExplanationCase& c, const std::string& prompt) override;
  SemanticScore score_pair(const std::string& clean_text, const std::string& adv_text) override;
};

struct EndpointConfig {
  std::string url = "http://127.0.0.1:8080/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string credential_env = "TABGUARD_LLM_KEY";
  int attempts = 3;
  double backoff_initial_s = 0.5;
  double backoff_factor = 2.0;
  int timeout_s = 30;
};

/// Chat-completions style HTTP client. The credential is read from the
/// environment and never written to the log sink.
class LiveProvider final : public LlmProvider {
 public:
  LiveProvider(EndpointConfig cfg, LogSink log = {});
  std::string tag() const override { return "live"; }
  std::string explain(const ExplanationCase& c, const std::string& prompt) override;
  SemanticScore score_pair(const std::string& clean_text, const std::string& adv_text) override;
  /// One chat completion with retries; throws ProviderError when all attempts fail.
  std::string query(const std::string& prompt);

 private:
  std::string redact(std::string text) const;
  EndpointConfig cfg_;
  LogSink log_;
  std::string credential_;
};

/// Strict parse of {"plausibility": p, "stability": s, "consistency": c}
/// with every value in [0, 1].
SemanticScore parse_rubric(const std::string& text);

struct SemanticConfig {
  std::string provider = "stub";
  EndpointConfig endpoint;
  std::size_t top_k = 5;
  std::size_t max_in_flight = 4;
  std::size_t n_instances = 50;

  nlohmann::ordered_json to_json() const;
  static SemanticConfig from_json(const nlohmann::json& j);
};

struct SemanticPair {
  std::string row_id;
  std::string clean_text;
  std::string adv_text;
  SemanticScore score;
  std::string error;  // non-empty when the instance failed
};

struct SriResult {
  std::vector<SemanticPair> pairs;  // ordered by input position
  double sri = 0.0;
  std::size_t failures = 0;
  std::string provider;
};

/// Explains both sides of every pair, scores them and averages the composites.
/// Instances are processed with at most max_in_flight concurrent calls.
SriResult sri(const std::vector<ExplanationCase>& clean, const std::vector<ExplanationCase>& adversarial,
              LlmProvider& provider, std::size_t max_in_flight = 4);

std::unique_ptr<LlmProvider> make_provider(const SemanticConfig& cfg, LogSink log = {});

}  // namespace tabguard
