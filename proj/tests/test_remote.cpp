#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include "advjudge/detection.hpp"
#include "advjudge/error.hpp"
#include "advjudge/parallel.hpp"
#include "advjudge/remote_judge.hpp"
#include "advjudge/response_cache.hpp"

using namespace advjudge;
using nlohmann::json;

namespace {

json chat_reply(double p_a) {
  return {{"choices",
           {{{"message", {{"role", "assistant"}, {"content", "A"}}},
             {"logprobs",
              {{"content",
                {{{"token", "A"},
                  {"logprob", std::log(p_a)},
                  {"top_logprobs",
                   {{{"token", "A"}, {"logprob", std::log(p_a)}},
                    {{"token", "B"}, {"logprob", std::log(1.0 - p_a)}},
                    {{"token", "Sure"}, {"logprob", std::log(0.001)}}}}}}}}}}}}};
}

class FakeServer {
 public:
  FakeServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

BackendConfig config_for(const std::string& url) {
  BackendConfig c;
  c.backend_id = "remote-test";
  c.endpoint_url = url;
  c.model_name = "judge-model";
  c.api_key_env = "ADVJUDGE_TEST_KEY";
  c.retry.attempts = 3;
  c.retry.backoff = std::chrono::milliseconds(1);
  c.request_timeout = std::chrono::milliseconds(5000);
  c.top_logprobs = 5;
  return c;
}

}  // namespace

TEST(Remote, ChatRequestWireFormat) {
  FakeServer fake;
  json seen_body;
  std::string seen_auth;
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_body = json::parse(req.body);
    seen_auth = req.get_header_value("Authorization");
    res.set_content(chat_reply(0.8).dump(), "application/json");
  });
  ::setenv("ADVJUDGE_TEST_KEY", "sk-test-123", 1);
  RemoteJudge judge(config_for(fake.url()));
  const double p = judge.compare("The article.", "Summary one.", "Summary two.", "OVE").p_first_better;
  EXPECT_NEAR(p, 0.8, 1e-12);
  EXPECT_EQ(seen_auth, "Bearer sk-test-123");
  EXPECT_EQ(seen_body.at("model"), "judge-model");
  EXPECT_EQ(seen_body.at("temperature"), 0);
  EXPECT_EQ(seen_body.at("logprobs"), true);
  EXPECT_EQ(seen_body.at("top_logprobs"), 5);
  EXPECT_EQ(seen_body.at("max_tokens"), 1);
  const auto content = seen_body.at("messages").at(0).at("content").get<std::string>();
  EXPECT_NE(content.find("Summary one."), std::string::npos);
  ::unsetenv("ADVJUDGE_TEST_KEY");
}

TEST(Remote, RetriesServerErrorsThenSucceeds) {
  FakeServer fake;
  std::atomic<int> hits{0};
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (++hits < 3) {
      res.status = hits == 1 ? 503 : 429;
      res.set_content("busy", "text/plain");
      return;
    }
    res.set_content(chat_reply(0.3).dump(), "application/json");
  });
  RemoteJudge judge(config_for(fake.url()));
  EXPECT_NEAR(judge.compare("c", "a", "b", "OVE").p_first_better, 0.3, 1e-12);
  EXPECT_EQ(hits.load(), 3);
}

TEST(Remote, ClientErrorsAreNotRetried) {
  FakeServer fake;
  std::atomic<int> hits{0};
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
    res.set_content("bad request", "text/plain");
  });
  RemoteJudge judge(config_for(fake.url()));
  EXPECT_THROW(judge.compare("c", "a", "b", "OVE"), BackendError);
  EXPECT_EQ(hits.load(), 1);
}

TEST(Remote, TransportFailureIsBackendError) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  auto cfg = config_for("http://127.0.0.1:" + std::to_string(port) + "/v1");
  cfg.retry.attempts = 2;
  cfg.request_timeout = std::chrono::milliseconds(200);
  RemoteJudge judge(cfg);
  EXPECT_THROW(judge.compare("c", "a", "b", "OVE"), BackendError);
}

TEST(Remote, MalformedReplyIsBackendError) {
  FakeServer fake;
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices": []})", "application/json");
  });
  RemoteJudge judge(config_for(fake.url()));
  EXPECT_THROW(judge.compare("c", "a", "b", "OVE"), BackendError);
}

TEST(Remote, EchoPerplexity) {
  FakeServer fake;
  json seen;
  fake.server().Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    const json reply = {{"choices",
                         {{{"text", "hello world again"},
                           {"logprobs",
                            {{"tokens", {"hello", " world", " again"}},
                             {"token_logprobs", {nullptr, -2.0, -4.0}}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  RemoteJudge judge(config_for(fake.url()));
  const auto score = perplexity(judge, "hello world again");
  EXPECT_DOUBLE_EQ(score.perp, 3.0);
  EXPECT_EQ(seen.at("echo"), true);
  EXPECT_EQ(seen.at("max_tokens"), 0);
  EXPECT_EQ(seen.at("logprobs"), 1);
  EXPECT_EQ(seen.at("prompt"), "hello world again");
}

TEST(Remote, AbsoluteDistributionFromTopLogprobs) {
  FakeServer fake;
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    const json reply = {{"choices",
                         {{{"message", {{"content", "4"}}},
                           {"logprobs",
                            {{"content",
                              {{{"token", "4"},
                                {"logprob", std::log(0.5)},
                                {"top_logprobs",
                                 {{{"token", "4"}, {"logprob", std::log(0.5)}},
                                  {{"token", "5"}, {"logprob", std::log(0.25)}},
                                  {{"token", "3"}, {"logprob", std::log(0.25)}}}}}}}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  RemoteJudge judge(config_for(fake.url()));
  EXPECT_NEAR(judge.score_distribution("c", "r", "OVE", 5).expectation(), 4.0, 1e-12);
  EXPECT_DOUBLE_EQ(judge.score_text("c", "r", "OVE", 5), 4.0);
}

TEST(Remote, InFlightRequestsAreCapped) {
  FakeServer fake;
  std::atomic<int> in_flight{0}, peak{0};
  fake.server().new_task_queue = [] { return new httplib::ThreadPool(16); };
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    const int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --in_flight;
    res.set_content(chat_reply(0.5).dump(), "application/json");
  });
  auto cfg = config_for(fake.url());
  cfg.max_parallel = 2;
  RemoteJudge judge(cfg);
  EXPECT_EQ(judge.preferred_concurrency(), 2);
  parallel_for(12, 8, [&](std::size_t i) { judge.compare("c", "a" + std::to_string(i), "b", "OVE"); });
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

TEST(Remote, CachedCallsSkipTheNetwork) {
  FakeServer fake;
  std::atomic<int> hits{0};
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.set_content(chat_reply(0.9).dump(), "application/json");
  });
  RemoteJudge judge(config_for(fake.url()));
  judge.set_cache(ResponseCache::in_memory());
  for (int i = 0; i < 20; ++i) EXPECT_NEAR(judge.compare("c", "a", "b", "OVE").p_first_better, 0.9, 1e-12);
  EXPECT_EQ(hits.load(), 1);
}

TEST(Remote, ConfigNeedsEndpoint) {
  BackendConfig c;
  c.backend_id = "r";
  EXPECT_THROW(RemoteJudge{c}, ConfigError);
  c.endpoint_url = "localhost:8000";
  EXPECT_THROW(RemoteJudge{c}, ConfigError);
}
