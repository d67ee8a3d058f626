#include "advjudge/judge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include <json.hpp>
#include <omp.h>

#include "advjudge/error.hpp"
#include "advjudge/response_cache.hpp"
#include "advjudge/text.hpp"

namespace advjudge {

using nlohmann::json;

std::string_view to_string(RequestKind kind) {
  switch (kind) {
    case RequestKind::comparative: return "comparative";
    case RequestKind::absolute_distribution: return "absolute-distribution";
    case RequestKind::absolute_text: return "absolute-text";
    case RequestKind::text_logprob: return "text-logprob";
  }
  return "?";
}

RequestKind parse_request_kind(std::string_view name) {
  if (name == "comparative") return RequestKind::comparative;
  if (name == "absolute-distribution") return RequestKind::absolute_distribution;
  if (name == "absolute-text") return RequestKind::absolute_text;
  if (name == "text-logprob") return RequestKind::text_logprob;
  throw Error("unknown request kind '" + std::string(name) + "'");
}

void validate_request(const JudgeRequest& request) {
  if (request.prompt.empty()) throw DataError("judge request has an empty prompt");
  const bool absolute = request.kind == RequestKind::absolute_distribution ||
                        request.kind == RequestKind::absolute_text;
  if (absolute && request.max_score < 2) {
    throw ConfigError("absolute assessment needs K >= 2, got " + std::to_string(request.max_score));
  }
}

double ScoreDistribution::expectation() const {
  double e = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) e += static_cast<double>(k + 1) * probs[k];
  return e;
}

ScoreDistribution renormalize(std::span<const double> raw) {
  double total = 0.0;
  for (double p : raw) {
    if (!std::isfinite(p) || p < 0.0) throw BackendError("invalid score probability " + std::to_string(p));
    total += p;
  }
  if (!(total > 0.0)) throw BackendError("no probability mass on any score token");
  ScoreDistribution d;
  d.probs.reserve(raw.size());
  for (double p : raw) d.probs.push_back(p / total);
  return d;
}

// ---------------------------------------------------------------------------
// Completion wire form

std::string Completion::to_raw() const {
  json top = json::array();
  for (const auto& t : top_logprobs) {
    if (std::isfinite(t.logprob)) top.push_back({{"token", t.token}, {"logprob", t.logprob}});
  }
  json tokens = json::array();
  for (double lp : token_logprobs) {
    if (std::isfinite(lp)) {
      tokens.push_back(lp);
    } else {
      tokens.push_back(nullptr);
    }
  }
  json obj = {{"content", content}, {"top_logprobs", top}, {"token_logprobs", tokens}};
  return obj.dump();
}

Completion Completion::from_raw(std::string_view raw) {
  Completion c;
  try {
    const json obj = json::parse(raw);
    c.content = obj.value("content", "");
    if (obj.contains("top_logprobs")) {
      for (const auto& t : obj.at("top_logprobs")) {
        c.top_logprobs.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
      }
    }
    if (obj.contains("token_logprobs")) {
      for (const auto& lp : obj.at("token_logprobs")) {
        c.token_logprobs.push_back(lp.is_null() ? -std::numeric_limits<double>::infinity() : lp.get<double>());
      }
    }
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed raw response: ") + e.what());
  }
  return c;
}

namespace {
double token_mass(const Completion& completion, std::string_view token) {
  double mass = 0.0;
  for (const auto& t : completion.top_logprobs) {
    if (trim(t.token) == token) mass += std::exp(t.logprob);
  }
  return mass;
}
}  // namespace

double extract_first_better(const Completion& completion, std::span<const std::string> answer_tokens) {
  if (answer_tokens.size() != 2) throw ConfigError("comparative assessment needs exactly two answer tokens");
  const double first = token_mass(completion, answer_tokens[0]);
  const double second = token_mass(completion, answer_tokens[1]);
  if (!(first + second > 0.0)) {
    throw BackendError("answer tokens '" + answer_tokens[0] + "'/'" + answer_tokens[1] +
                       "' absent from returned log-probabilities (template/backend mismatch?)");
  }
  return first / (first + second);
}

ScoreDistribution extract_score_distribution(const Completion& completion, int max_score,
                                             std::span<const std::string> score_tokens) {
  if (max_score < 2) throw ConfigError("K must be >= 2");
  if (!score_tokens.empty() && static_cast<int>(score_tokens.size()) != max_score) {
    throw ConfigError("score token list has " + std::to_string(score_tokens.size()) + " entries, K is " +
                      std::to_string(max_score));
  }
  std::vector<double> raw(static_cast<std::size_t>(max_score), 0.0);
  for (int k = 1; k <= max_score; ++k) {
    const std::string token = score_tokens.empty() ? std::to_string(k) : score_tokens[k - 1];
    raw[k - 1] = token_mass(completion, token);
  }
  double total = 0.0;
  for (double p : raw) total += p;
  if (!(total > 0.0)) {
    throw BackendError("none of the " + std::to_string(max_score) +
                       " score tokens found in returned log-probabilities (prompt/backend mismatch?)");
  }
  return renormalize(raw);
}

double parse_score_text(std::string_view content, int max_score) {
  std::size_t i = 0;
  while (i < content.size() && !(content[i] >= '0' && content[i] <= '9')) ++i;
  if (i == content.size()) {
    throw BackendError("no numeric score in completion: \"" + std::string(content.substr(0, 80)) + "\"");
  }
  std::size_t j = i;
  while (j < content.size() && content[j] >= '0' && content[j] <= '9') ++j;
  if (j + 1 < content.size() && content[j] == '.' && content[j + 1] >= '0' && content[j + 1] <= '9') {
    ++j;
    while (j < content.size() && content[j] >= '0' && content[j] <= '9') ++j;
  }
  const double value = std::strtod(std::string(content.substr(i, j - i)).c_str(), nullptr);
  return std::clamp(value, 1.0, static_cast<double>(max_score));
}

void validate_backend_config(const BackendConfig& config) {
  if (config.backend_id.empty()) throw ConfigError("backend_id must not be empty");
  if (config.max_parallel < 1) throw ConfigError("backend '" + config.backend_id + "': max_parallel must be >= 1");
  if (config.retry.attempts < 1) throw ConfigError("backend '" + config.backend_id + "': retry attempts must be >= 1");
  if (config.comparative_tokens.size() != 2) {
    throw ConfigError("backend '" + config.backend_id + "': comparative_tokens needs exactly two entries");
  }
}

// ---------------------------------------------------------------------------
// JudgeBackend

JudgeBackend::JudgeBackend(BackendConfig config, PromptTemplates templates)
    : config_(std::move(config)), templates_(std::move(templates)) {
  validate_backend_config(config_);
}

JudgeBackend::~JudgeBackend() = default;

int JudgeBackend::preferred_concurrency() const { return omp_get_max_threads(); }

std::string JudgeBackend::request_hash(const JudgeRequest& request) const {
  return cache_request_hash(config_.backend_id, config_.model_name, request.prompt, request.kind, request.max_score);
}

std::string JudgeBackend::raw_call(const JudgeRequest& request) const {
  validate_request(request);
  if (!cache_) return complete(request).to_raw();
  return cache_->get_or_call(request_hash(request), config_.backend_id, request.kind,
                             [&] { return complete(request).to_raw(); });
}

namespace {
void require_text(std::string_view value, const char* what) {
  if (value.empty()) throw DataError(std::string("judge input '") + what + "' is empty");
}
}  // namespace

ComparativeResponse JudgeBackend::compare(std::string_view context, std::string_view first,
                                          std::string_view second, std::string_view attribute) const {
  require_text(context, "context");
  require_text(first, "first");
  require_text(second, "second");
  JudgeRequest r;
  r.kind = RequestKind::comparative;
  r.prompt = templates_.render_comparative(context, first, second, attribute);
  r.max_tokens = 1;
  r.context = context;
  r.first = first;
  r.second = second;
  r.attribute = attribute;
  const auto completion = Completion::from_raw(raw_call(r));
  return {extract_first_better(completion, config_.comparative_tokens)};
}

ScoreDistribution JudgeBackend::score_distribution(std::string_view context, std::string_view text,
                                                   std::string_view attribute, int max_score) const {
  require_text(context, "context");
  require_text(text, "response");
  JudgeRequest r;
  r.kind = RequestKind::absolute_distribution;
  r.prompt = templates_.render_absolute(context, text, attribute, max_score);
  r.max_score = max_score;
  r.max_tokens = 1;
  r.context = context;
  r.first = text;
  r.attribute = attribute;
  const auto completion = Completion::from_raw(raw_call(r));
  return extract_score_distribution(completion, max_score, config_.score_tokens);
}

double JudgeBackend::score_text(std::string_view context, std::string_view text, std::string_view attribute,
                                int max_score) const {
  require_text(context, "context");
  require_text(text, "response");
  JudgeRequest r;
  r.kind = RequestKind::absolute_text;
  r.prompt = templates_.render_absolute(context, text, attribute, max_score);
  r.max_score = max_score;
  r.max_tokens = config_.max_text_tokens;
  r.context = context;
  r.first = text;
  r.attribute = attribute;
  return parse_score_text(Completion::from_raw(raw_call(r)).content, max_score);
}

TextLogLikelihood JudgeBackend::text_log_likelihood(std::string_view text) const {
  require_text(text, "text");
  if (!supports_text_logprobs()) {
    throw BackendError("backend '" + config_.backend_id + "' does not provide text log-probabilities");
  }
  JudgeRequest r;
  r.kind = RequestKind::text_logprob;
  r.prompt = text;
  r.max_tokens = 0;
  r.first = text;
  const auto completion = Completion::from_raw(raw_call(r));
  if (completion.token_logprobs.empty()) {
    throw BackendError("backend '" + config_.backend_id + "' returned no token log-probabilities");
  }
  TextLogLikelihood out;
  for (double lp : completion.token_logprobs) out.total_logprob += lp;
  out.token_count = completion.token_logprobs.size();
  return out;
}

}  // namespace advjudge
