#include "advjudge/remote_judge.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "advjudge/error.hpp"

namespace advjudge {

using nlohmann::json;

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

// RAII slot on the in-flight semaphore.
class Slot {
 public:
  explicit Slot(std::counting_semaphore<4096>& s) : s_(s) { s_.acquire(); }
  ~Slot() { s_.release(); }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;

 private:
  std::counting_semaphore<4096>& s_;
};

}  // namespace

RemoteJudge::RemoteJudge(BackendConfig config, PromptTemplates templates)
    : JudgeBackend(std::move(config), std::move(templates)),
      slots_(std::min<std::ptrdiff_t>(this->config().max_parallel, 4096)) {
  if (this->config().endpoint_url.empty()) {
    throw ConfigError("remote backend '" + id() + "' needs endpoint_url");
  }
  std::tie(origin_, base_path_) = split_url(this->config().endpoint_url);
}

RemoteJudge::~RemoteJudge() = default;

json RemoteJudge::chat_body(const JudgeRequest& request) const {
  return {{"model", config().model_name},
          {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
          {"temperature", 0},
          {"max_tokens", request.max_tokens},
          {"logprobs", true},
          {"top_logprobs", config().top_logprobs}};
}

json RemoteJudge::echo_body(const JudgeRequest& request) const {
  return {{"model", config().model_name},
          {"prompt", request.prompt},
          {"temperature", 0},
          {"max_tokens", 0},
          {"echo", true},
          {"logprobs", 1}};
}

std::string RemoteJudge::post(const std::string& path, const json& body) const {
  std::string api_key;
  if (!config().api_key_env.empty()) {
    if (const char* v = std::getenv(config().api_key_env.c_str())) api_key = v;
  }
  const auto timeout = config().request_timeout;
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt < config().retry.attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config().retry.backoff * (1 << (attempt - 1)));
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

    httplib::Result res = [&] {
      Slot slot(slots_);
      return client.Post(base_path_ + path, headers, payload, "application/json");
    }();
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return res->body;
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    if (res->status != 429 && res->status < 500) break;
  }
  throw BackendError("backend '" + id() + "' " + path + " failed after retries: " + last_error);
}

Completion RemoteJudge::complete(const JudgeRequest& request) const {
  try {
    if (request.kind == RequestKind::text_logprob) {
      return parse_echo_completion(json::parse(post("/completions", echo_body(request))));
    }
    return parse_chat_completion(json::parse(post("/chat/completions", chat_body(request))));
  } catch (const json::exception& e) {
    throw BackendError("backend '" + id() + "': unexpected response: " + e.what());
  }
}

Completion parse_chat_completion(const json& response) {
  const auto& choice = response.at("choices").at(0);
  Completion c;
  const auto& message = choice.at("message");
  if (message.contains("content") && message.at("content").is_string()) {
    c.content = message.at("content").get<std::string>();
  }
  if (choice.contains("logprobs") && choice.at("logprobs").is_object()) {
    const auto& lp = choice.at("logprobs");
    if (lp.contains("content") && lp.at("content").is_array() && !lp.at("content").empty()) {
      const auto& first = lp.at("content").at(0);
      if (first.contains("top_logprobs")) {
        for (const auto& t : first.at("top_logprobs")) {
          c.top_logprobs.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
        }
      } else {
        c.top_logprobs.push_back({first.at("token").get<std::string>(), first.at("logprob").get<double>()});
      }
    }
  }
  return c;
}

Completion parse_echo_completion(const json& response) {
  const auto& choice = response.at("choices").at(0);
  Completion c;
  if (choice.contains("text") && choice.at("text").is_string()) c.content = choice.at("text").get<std::string>();
  const auto& values = choice.at("logprobs").at("token_logprobs");
  for (const auto& v : values) {
    if (!v.is_null()) c.token_logprobs.push_back(v.get<double>());
  }
  return c;
}

}  // namespace advjudge
