#pragma once

#include <chrono>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advjudge/prompt_templates.hpp"

namespace advjudge {

class ResponseCache;

enum class RequestKind { comparative, absolute_distribution, absolute_text, text_logprob };

std::string_view to_string(RequestKind kind);
RequestKind parse_request_kind(std::string_view name);

struct JudgeRequest {
  RequestKind kind = RequestKind::comparative;
  std::string prompt;
  int max_score = 0;  // K, absolute kinds only
  int max_tokens = 1;

  // The inputs the prompt was rendered from. Remote backends only read the
  // prompt; rule-based mocks read these.
  std::string context;
  std::string first;
  std::string second;
  std::string attribute;
};

/// Throws if the request breaks the JudgeRequest invariants.
void validate_request(const JudgeRequest& request);

struct ComparativeResponse {
  double p_first_better = 0.5;
};

/// Probabilities over scores 1..K; probs[k-1] = P(k).
struct ScoreDistribution {
  std::vector<double> probs;

  int max_score() const { return static_cast<int>(probs.size()); }
  /// sum_k k * P(k)
  double expectation() const;
};

/// Divides by the total. Throws BackendError when nothing is left to
/// normalise (all zero) or a value is negative / non-finite.
ScoreDistribution renormalize(std::span<const double> raw);

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
};

/// Normalised model output: text content, top log-probabilities at the first
/// generated position, and per-token log-probabilities of an echoed input.
/// This is the "raw response" stored in the cache.
struct Completion {
  std::string content;
  std::vector<TokenLogprob> top_logprobs;
  std::vector<double> token_logprobs;

  std::string to_raw() const;
  static Completion from_raw(std::string_view raw);
};

/// Sums probability mass per answer token (surrounding whitespace ignored)
/// and renormalises over exactly the two answer tokens. answer_tokens[0]
/// means "first is better".
double extract_first_better(const Completion& completion, std::span<const std::string> answer_tokens);

/// Score tokens default to "1".."K"; missing tokens get probability 0.
ScoreDistribution extract_score_distribution(const Completion& completion, int max_score,
                                             std::span<const std::string> score_tokens = {});

/// First numeric literal in the text, clamped to [1, K].
double parse_score_text(std::string_view content, int max_score);

struct TextLogLikelihood {
  double total_logprob = 0.0;
  std::size_t token_count = 0;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds backoff{500};
};

struct BackendConfig {
  std::string backend_id;
  std::string endpoint_url;
  std::string model_name;
  std::string api_key_env;
  std::vector<std::string> comparative_tokens{"A", "B"};
  std::vector<std::string> score_tokens;  // empty: "1".."K"
  std::chrono::milliseconds request_timeout{60000};
  int max_parallel = 4;
  int top_logprobs = 20;
  int max_text_tokens = 16;
  RetryPolicy retry;
};

void validate_backend_config(const BackendConfig& config);

/// Judge F. Renders prompts, routes every model call through the optional
/// response cache, and extracts probabilities from the normalised
/// completion. Subclasses only implement complete(). All public methods
/// are safe to call concurrently.
class JudgeBackend {
 public:
  explicit JudgeBackend(BackendConfig config, PromptTemplates templates = PromptTemplates::summarization());
  virtual ~JudgeBackend();

  JudgeBackend(const JudgeBackend&) = delete;
  JudgeBackend& operator=(const JudgeBackend&) = delete;

  const BackendConfig& config() const { return config_; }
  const std::string& id() const { return config_.backend_id; }

  void set_templates(PromptTemplates templates) { templates_ = std::move(templates); }
  const PromptTemplates& templates() const { return templates_; }

  void set_cache(std::shared_ptr<ResponseCache> cache) { cache_ = std::move(cache); }
  const std::shared_ptr<ResponseCache>& cache() const { return cache_; }

  /// F(first, second, d): probability that `first` is the better response.
  ComparativeResponse compare(std::string_view context, std::string_view first, std::string_view second,
                              std::string_view attribute) const;

  ScoreDistribution score_distribution(std::string_view context, std::string_view text,
                                       std::string_view attribute, int max_score) const;

  double score_text(std::string_view context, std::string_view text, std::string_view attribute,
                    int max_score) const;

  /// Log-probability of `text` under the backend used as a language model.
  TextLogLikelihood text_log_likelihood(std::string_view text) const;

  virtual bool supports_text_logprobs() const { return true; }

  /// Thread count worth running against this backend.
  virtual int preferred_concurrency() const;

  /// Cache-aware call returning the raw (serialised Completion) response.
  std::string raw_call(const JudgeRequest& request) const;

  std::string request_hash(const JudgeRequest& request) const;

 protected:
  virtual Completion complete(const JudgeRequest& request) const = 0;

 private:
  BackendConfig config_;
  PromptTemplates templates_;
  std::shared_ptr<ResponseCache> cache_;
};

}  // namespace advjudge
