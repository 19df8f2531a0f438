#include "tabguard/semantic.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>

namespace tabguard {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

ExplanationCase make_case(std::string row_id, std::string scenario, double probability,
                          const std::vector<std::string>& names, const std::vector<std::string>& values,
                          const std::vector<double>& attributions, std::size_t top_k) {
  if (names.size() != values.size() || names.size() != attributions.size()) {
    throw ShapeError("make_case: names, values and attributions differ in length");
  }
  if (top_k == 0) throw ParamError("top_k must be at least 1");
  std::vector<std::size_t> order(names.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(attributions[a]) > std::abs(attributions[b]);
  });
  ExplanationCase c{std::move(row_id), std::move(scenario), probability, {}};
  for (std::size_t k = 0; k < std::min(top_k, order.size()); ++k) {
    const std::size_t j = order[k];
    c.features.push_back({names[j], values[j], attributions[j]});
  }
  return c;
}

std::string render_prompt(const ExplanationCase& c) {
  if (c.features.empty()) throw ParamError("render_prompt: case has no features");
  std::ostringstream out;
  out << "You are a credit-risk analyst. Explain in plain language why the model assigned the "
         "predicted probability of default below. Refer to the listed features, most influential "
         "first. Begin your answer with a line of the form \"Primary driver: <feature name>\".\n\n";
  out << "Predicted probability of default: " << fmt("%.4f", c.probability) << "\n";
  out << "Most influential features (attribution in probability units):\n";
  for (std::size_t k = 0; k < c.features.size(); ++k) {
    const auto& f = c.features[k];
    out << (k + 1) << ". " << f.name << " = " << f.value << ": "
        << (f.attribution < 0.0 ? "decreases risk" : "increases risk") << " (" << fmt("%+.4f", f.attribution)
        << ")\n";
  }
  return out.str();
}

std::string render_rubric_prompt(const std::string& clean_text, const std::string& adv_text) {
  std::ostringstream out;
  out << "Two explanations of the same credit decision follow. Rate them on three criteria, each "
         "between 0 and 1: plausibility (are both explanations financially sensible), stability "
         "(do they convey the same reasoning), consistency (do they name the same primary driver "
         "and agree on the direction of each factor). Reply with only a JSON object of the form "
         "{\"plausibility\": p, \"stability\": s, \"consistency\": c}.\n\n";
  out << "Explanation A:\n" << clean_text << "\n\nExplanation B:\n" << adv_text << "\n";
  return out.str();
}

SemanticScore SemanticScore::from_components(double p, double s, double c) {
  return {p, s, c, (p + s + c) / 3.0};
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    std::transform(tok.begin(), tok.end(), tok.begin(), [](unsigned char ch) { return std::tolower(ch); });
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

double token_jaccard(const std::string& a, const std::string& b) {
  const auto ta = tokenize(a), tb = tokenize(b);
  const std::set<std::string> sa(ta.begin(), ta.end()), sb(tb.begin(), tb.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

std::string top_cited_feature(const std::string& text) {
  static const std::string marker = "Primary driver:";
  const auto pos = text.find(marker);
  if (pos != std::string::npos) {
    const auto start = pos + marker.size();
    const auto end = text.find('\n', start);
    return trim(text.substr(start, end == std::string::npos ? std::string::npos : end - start));
  }
  const auto tokens = tokenize(text);
  return tokens.empty() ? std::string() : tokens.front();
}

std::string StubProvider::explain(const ExplanationCase& c, const std::string&) {
  if (c.features.empty()) throw ProviderError("stub provider: case has no features");
  std::ostringstream out;
  out << "Primary driver: " << c.features.front().name << "\n";
  for (const auto& f : c.features) {
    out << f.name << " = " << f.value << " " << (f.attribution < 0.0 ? "decreases" : "increases") << " risk\n";
  }
  out << "Estimated default probability " << fmt("%.2f", c.probability) << "\n";
  return out.str();
}

SemanticScore StubProvider::score_pair(const std::string& clean_text, const std::string& adv_text) {
  if (clean_text.empty() || adv_text.empty()) throw ProviderError("score_pair: empty explanation text");
  const double consistency = top_cited_feature(clean_text) == top_cited_feature(adv_text) ? 1.0 : 0.0;
  return SemanticScore::from_components(1.0, token_jaccard(clean_text, adv_text), consistency);
}

SemanticScore parse_rubric(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    throw ProviderError("rubric response is not valid JSON");
  }
  if (!j.is_object()) throw ProviderError("rubric response is not a JSON object");
  double v[3];
  const char* keys[3] = {"plausibility", "stability", "consistency"};
  for (int k = 0; k < 3; ++k) {
    if (!j.contains(keys[k]) || !j[keys[k]].is_number()) {
      throw ProviderError(std::string("rubric response lacks numeric '") + keys[k] + "'");
    }
    v[k] = j[keys[k]].get<double>();
    if (!(v[k] >= 0.0 && v[k] <= 1.0)) throw ProviderError(std::string("rubric '") + keys[k] + "' outside [0, 1]");
  }
  return SemanticScore::from_components(v[0], v[1], v[2]);
}

LiveProvider::LiveProvider(EndpointConfig cfg, LogSink log) : cfg_(std::move(cfg)), log_(std::move(log)) {
  if (cfg_.attempts < 1) throw ParamError("endpoint attempts must be at least 1");
  if (const char* key = std::getenv(cfg_.credential_env.c_str())) credential_ = key;
}

std::string LiveProvider::redact(std::string text) const {
  if (credential_.empty()) return text;
  for (auto pos = text.find(credential_); pos != std::string::npos; pos = text.find(credential_, pos)) {
    text.replace(pos, credential_.size(), "[REDACTED]");
  }
  return text;
}

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ParamError("endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string LiveProvider::query(const std::string& prompt) {
  if (credential_.empty()) {
    throw ProviderError("no credential: environment variable " + cfg_.credential_env + " is unset");
  }
  const ParsedUrl url = split_url(cfg_.url);
  ojson body;
  body["model"] = cfg_.model;
  body["temperature"] = 0;
  body["messages"] = ojson::array({ojson{{"role", "user"}, {"content", prompt}}});
  const std::string payload = body.dump();
  const httplib::Headers headers{{"Authorization", "Bearer " + credential_}};

  std::string last_error;
  double wait = cfg_.backoff_initial_s;
  int made = 0;
  for (int attempt = 1; attempt <= cfg_.attempts; ++attempt) {
    if (log_) {
      log_(redact("POST " + cfg_.url + " attempt " + std::to_string(attempt) +
                  " headers {Authorization: Bearer [REDACTED]} body " + payload));
    }
    ++made;
    httplib::Client client(url.origin);
    client.set_connection_timeout(cfg_.timeout_s, 0);
    client.set_read_timeout(cfg_.timeout_s, 0);
    auto res = client.Post(url.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      if (log_) log_(redact("response 200 body " + res->body));
      try {
        const json j = json::parse(res->body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (!content.is_string() || content.get<std::string>().empty()) {
          throw ProviderError("provider returned an empty message");
        }
        return content.get<std::string>();
      } catch (const json::exception& e) {
        throw ProviderError(redact(std::string("malformed provider response: ") + e.what()));
      }
    } else {
      last_error = "HTTP " + std::to_string(res->status);
      if (log_) log_(redact("response " + std::to_string(res->status) + " body " + res->body));
      if (res->status == 401 || res->status == 403) break;  // retrying cannot fix authorization
    }
    if (log_) log_(redact("attempt " + std::to_string(attempt) + " failed: " + last_error));
    if (attempt < cfg_.attempts && wait > 0.0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
      wait *= cfg_.backoff_factor;
    }
  }
  throw ProviderError(redact("provider request to " + cfg_.url + " failed after " + std::to_string(made) +
                             " attempts: " + last_error));
}

std::string LiveProvider::explain(const ExplanationCase&, const std::string& prompt) { return query(prompt); }

SemanticScore LiveProvider::score_pair(const std::string& clean_text, const std::string& adv_text) {
  if (clean_text.empty() || adv_text.empty()) throw ProviderError("score_pair: empty explanation text");
  return parse_rubric(trim(query(render_rubric_prompt(clean_text, adv_text))));
}

ojson SemanticConfig::to_json() const {
  ojson j;
  j["provider"] = provider;
  j["endpoint"] = endpoint.url;
  j["model"] = endpoint.model;
  j["top_k"] = top_k;
  j["max_in_flight"] = max_in_flight;
  j["n_instances"] = n_instances;
  return j;
}

SemanticConfig SemanticConfig::from_json(const json& j) {
  SemanticConfig c;
  if (j.is_null()) return c;
  c.provider = j.value("provider", c.provider);
  if (c.provider != "stub" && c.provider != "live") throw ParamError("semantic.provider must be stub or live");
  c.endpoint.url = j.value("endpoint", c.endpoint.url);
  c.endpoint.model = j.value("model", c.endpoint.model);
  c.endpoint.attempts = j.value("attempts", c.endpoint.attempts);
  c.endpoint.backoff_initial_s = j.value("backoff_s", c.endpoint.backoff_initial_s);
  c.endpoint.timeout_s = j.value("timeout_s", c.endpoint.timeout_s);
  c.top_k = j.value("top_k", c.top_k);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  c.n_instances = j.value("n_instances", c.n_instances);
  if (c.top_k == 0) throw ParamError("semantic.top_k must be at least 1");
  if (c.max_in_flight == 0) throw ParamError("semantic.max_in_flight must be at least 1");
  return c;
}

SriResult sri(const std::vector<ExplanationCase>& clean, const std::vector<ExplanationCase>& adversarial,
              LlmProvider& provider, std::size_t max_in_flight) {
  if (clean.size() != adversarial.size()) throw ShapeError("sri: clean and adversarial cases are not aligned");
  if (clean.empty()) throw MetricError("sri: no instances to score");
  SriResult out;
  out.provider = provider.tag();
  out.pairs.resize(clean.size());
  parallel_for_blocks(clean.size(), std::max<std::size_t>(1, max_in_flight), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto& p = out.pairs[i];
      p.row_id = clean[i].row_id;
      try {
        p.clean_text = provider.explain(clean[i], render_prompt(clean[i]));
        p.adv_text = provider.explain(adversarial[i], render_prompt(adversarial[i]));
        p.score = provider.score_pair(p.clean_text, p.adv_text);
      } catch (const Error& err) {
        p.error = err.what();
      }
    }
  });
  double total = 0.0;
  std::size_t ok = 0;
  for (const auto& p : out.pairs) {
    if (!p.error.empty()) {
      ++out.failures;
      continue;
    }
    total += p.score.composite;
    ++ok;
  }
  if (ok == 0) throw ProviderError("sri: every instance failed; first error: " + out.pairs.front().error);
  out.sri = total / static_cast<double>(ok);
  return out;
}

std::unique_ptr<LlmProvider> make_provider(const SemanticConfig& cfg, LogSink log) {
  if (cfg.provider == "live") return std::make_unique<LiveProvider>(cfg.endpoint, std::move(log));
  return std::make_unique<StubProvider>();
}

}  // namespace tabguard
