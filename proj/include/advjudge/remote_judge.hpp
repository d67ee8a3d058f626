#pragma once

#include <memory>
#include <semaphore>
#include <string>

#include <json.hpp>

#include "advjudge/judge.hpp"

namespace advjudge {

/// Judge served by an OpenAI-compatible HTTP endpoint.
///
/// Assessment requests go to POST {endpoint_url}/chat/completions with
/// temperature 0, logprobs=true and top_logprobs. Language-model requests
/// (perplexity) go to POST {endpoint_url}/completions with echo=true,
/// max_tokens=0, logprobs=1, which vLLM-style servers answer with the
/// log-probability of every prompt token.
///
/// In-flight requests are capped at max_parallel. Transport failures, 429
/// and 5xx answers are retried with exponential backoff.
class RemoteJudge : public JudgeBackend {
 public:
  explicit RemoteJudge(BackendConfig config, PromptTemplates templates = PromptTemplates::summarization());
  ~RemoteJudge() override;

  int preferred_concurrency() const override { return config().max_parallel; }

  /// Request bodies, exposed for tests of the wire format.
  nlohmann::json chat_body(const JudgeRequest& request) const;
  nlohmann::json echo_body(const JudgeRequest& request) const;

 protected:
  Completion complete(const JudgeRequest& request) const override;

 private:
  std::string post(const std::string& path, const nlohmann::json& body) const;

  std::string origin_;     // scheme://host[:port]
  std::string base_path_;  // e.g. "/v1"
  mutable std::counting_semaphore<4096> slots_;
};

/// chat/completions response -> Completion (content + first-position top log-probs).
Completion parse_chat_completion(const nlohmann::json& response);

/// completions echo response -> Completion (per-token log-probs; the
/// leading null entry for the first token is dropped).
Completion parse_echo_completion(const nlohmann::json& response);

}  // namespace advjudge
