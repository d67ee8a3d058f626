#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "advjudge/judge.hpp"

namespace advjudge {

struct MockInput {
  std::string_view context;
  std::string_view text;
  std::string_view attribute;
};

using QualityFn = std::function<double(const MockInput&)>;

/// Deterministic rule set behind a MockJudge. Every callable must be pure.
struct MockRules {
  /// Latent quality of a text. Drives every default below.
  QualityFn quality;
  /// Default comparative rule: logistic(slope * (q(first) - q(second))).
  double comparative_slope = 1.0;
  /// Optional override of the comparative rule (e.g. to model positional bias).
  std::function<double(std::string_view context, std::string_view first, std::string_view second,
                       std::string_view attribute)>
      compare;
  /// Optional override of the raw (unnormalised) score-token probabilities.
  /// Default: the two scores bracketing clamp(q, 1, K), weighted so the
  /// expectation equals the clamped quality.
  std::function<std::vector<double>(const MockInput&, int max_score)> distribution;
  /// Optional override of the text completion for direct scoring.
  std::function<std::string(const MockInput&, int max_score)> completion_text;
  /// Per-token log-probabilities when used as a language model; unset means
  /// the mock cannot score perplexity.
  std::function<std::vector<double>(std::string_view text)> token_logprobs;
};

/// Rule-driven in-process judge. Counts every model invocation (cache
/// misses only, when a cache is attached).
class MockJudge : public JudgeBackend {
 public:
  MockJudge(std::string backend_id, MockRules rules,
            PromptTemplates templates = PromptTemplates::summarization());

  std::size_t calls() const { return calls_.load(); }
  void reset_calls() { calls_ = 0; }

  bool supports_text_logprobs() const override { return static_cast<bool>(rules_.token_logprobs); }

 protected:
  Completion complete(const JudgeRequest& request) const override;

 private:
  MockRules rules_;
  mutable std::atomic<std::size_t> calls_{0};
};

double logistic(double x);

/// Splits clamp(q, 1, K) between its neighbouring integer scores.
std::vector<double> interpolated_distribution(double quality, int max_score);

namespace mock_rules {

/// Number of whitespace-separated words.
QualityFn word_count();

/// min(cap, base + weight * #occurrences of any keyword).
QualityFn keyword(std::set<std::string> keywords, double base, double weight, double cap);

/// Same value for every text.
QualityFn constant(double value);

/// Looks up (attribute, text) in a table. Unknown texts fall back to the
/// longest known text they start with (attack phrases are suffixes), then
/// to `fallback`.
QualityFn lookup(std::map<std::string, std::map<std::string, double>> by_attribute, double fallback);

/// Words found in `known` get `known_logprob`, everything else `unknown_logprob`.
std::function<std::vector<double>(std::string_view)> vocabulary_lm(std::set<std::string> known,
                                                                    double known_logprob,
                                                                    double unknown_logprob);

/// Per-word log-probability drawn from a hash of the word, uniform in [lo, hi].
std::function<std::vector<double>(std::string_view)> hashed_lm(double lo, double hi);

/// Every token equally likely among `vocab_size` options.
std::function<std::vector<double>(std::string_view)> uniform_lm(double vocab_size);

}  // namespace mock_rules

}  // namespace advjudge
