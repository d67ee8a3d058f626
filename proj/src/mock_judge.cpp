#include "advjudge/mock_judge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "advjudge/error.hpp"
#include "advjudge/hashing.hpp"
#include "advjudge/text.hpp"

namespace advjudge {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> interpolated_distribution(double quality, int max_score) {
  std::vector<double> probs(static_cast<std::size_t>(max_score), 0.0);
  const double q = std::clamp(quality, 1.0, static_cast<double>(max_score));
  const double lo = std::floor(q);
  const double frac = q - lo;
  const auto i = static_cast<std::size_t>(lo) - 1;
  probs[i] = 1.0 - frac;
  if (frac > 0.0) probs[i + 1] = frac;
  return probs;
}

MockJudge::MockJudge(std::string backend_id, MockRules rules, PromptTemplates templates)
    : JudgeBackend(BackendConfig{.backend_id = std::move(backend_id), .model_name = "mock"}, std::move(templates)),
      rules_(std::move(rules)) {}

Completion MockJudge::complete(const JudgeRequest& request) const {
  ++calls_;
  Completion c;
  const auto& tokens = config().comparative_tokens;
  switch (request.kind) {
    case RequestKind::comparative: {
      double p = 0.5;
      if (rules_.compare) {
        p = rules_.compare(request.context, request.first, request.second, request.attribute);
      } else {
        if (!rules_.quality) throw ConfigError("mock '" + id() + "' has no quality rule");
        const double d = rules_.quality({request.context, request.first, request.attribute}) -
                         rules_.quality({request.context, request.second, request.attribute});
        p = logistic(rules_.comparative_slope * d);
      }
      c.top_logprobs.push_back({tokens[0], std::log(p)});
      c.top_logprobs.push_back({tokens[1], std::log1p(-p)});
      c.content = p >= 0.5 ? tokens[0] : tokens[1];
      break;
    }
    case RequestKind::absolute_distribution: {
      const MockInput in{request.context, request.first, request.attribute};
      std::vector<double> probs;
      if (rules_.distribution) {
        probs = rules_.distribution(in, request.max_score);
      } else {
        if (!rules_.quality) throw ConfigError("mock '" + id() + "' has no quality rule");
        probs = interpolated_distribution(rules_.quality(in), request.max_score);
      }
      std::size_t best = 0;
      for (std::size_t k = 0; k < probs.size(); ++k) {
        if (probs[k] > 0.0) c.top_logprobs.push_back({std::to_string(k + 1), std::log(probs[k])});
        if (probs[k] > probs[best]) best = k;
      }
      c.content = std::to_string(best + 1);
      break;
    }
    case RequestKind::absolute_text: {
      const MockInput in{request.context, request.first, request.attribute};
      if (rules_.completion_text) {
        c.content = rules_.completion_text(in, request.max_score);
      } else {
        if (!rules_.quality) throw ConfigError("mock '" + id() + "' has no quality rule");
        const double q = std::clamp(rules_.quality(in), 1.0, static_cast<double>(request.max_score));
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", q);
        c.content = buf;
      }
      break;
    }
    case RequestKind::text_logprob: {
      if (!rules_.token_logprobs) throw BackendError("mock '" + id() + "' has no language-model rule");
      c.token_logprobs = rules_.token_logprobs(request.first);
      break;
    }
  }
  return c;
}

namespace mock_rules {

QualityFn word_count() {
  return [](const MockInput& in) { return static_cast<double>(split_words(in.text).size()); };
}

QualityFn keyword(std::set<std::string> keywords, double base, double weight, double cap) {
  return [keywords = std::move(keywords), base, weight, cap](const MockInput& in) {
    std::size_t hits = 0;
    for (const auto& w : split_words(in.text)) hits += keywords.contains(w) ? 1 : 0;
    return std::min(cap, base + weight * static_cast<double>(hits));
  };
}

QualityFn constant(double value) {
  return [value](const MockInput&) { return value; };
}

QualityFn lookup(std::map<std::string, std::map<std::string, double>> by_attribute, double fallback) {
  return [table = std::move(by_attribute), fallback](const MockInput& in) {
    const auto at = table.find(std::string(in.attribute));
    if (at == table.end()) return fallback;
    const auto& scores = at->second;
    if (auto it = scores.find(std::string(in.text)); it != scores.end()) return it->second;
    // Strip trailing words until a known text remains.
    std::string_view text = in.text;
    while (true) {
      const auto cut = text.find_last_of(' ');
      if (cut == std::string_view::npos) break;
      text = text.substr(0, cut);
      if (auto it = scores.find(std::string(text)); it != scores.end()) return it->second;
    }
    return fallback;
  };
}

std::function<std::vector<double>(std::string_view)> vocabulary_lm(std::set<std::string> known,
                                                                    double known_logprob,
                                                                    double unknown_logprob) {
  return [known = std::move(known), known_logprob, unknown_logprob](std::string_view text) {
    std::vector<double> out;
    for (const auto& w : split_words(text)) out.push_back(known.contains(w) ? known_logprob : unknown_logprob);
    return out;
  };
}

std::function<std::vector<double>(std::string_view)> hashed_lm(double lo, double hi) {
  return [lo, hi](std::string_view text) {
    std::vector<double> out;
    for (const auto& w : split_words(text)) {
      const std::string h = sha256_hex(w).substr(0, 13);
      const double u = static_cast<double>(std::stoull(h, nullptr, 16)) / static_cast<double>(1ULL << 52);
      out.push_back(lo + (hi - lo) * u);
    }
    return out;
  };
}

std::function<std::vector<double>(std::string_view)> uniform_lm(double vocab_size) {
  return [vocab_size](std::string_view text) {
    return std::vector<double>(split_words(text).size(), -std::log(vocab_size));
  };
}

}  // namespace mock_rules

}  // namespace advjudge
