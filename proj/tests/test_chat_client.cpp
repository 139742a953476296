#include <mimetic/chat_client.hpp>

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

using namespace mimetic;
using namespace std::chrono_literals;

namespace {

/// Local chat-completions endpoint whose handler the test supplies.
class MockServer {
 public:
  explicit MockServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }
  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string reply_with(const std::string& text) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
}

BackendConfig config_for(const MockServer& server) {
  BackendConfig c;
  c.endpoint = server.base();
  c.model = "test-model";
  c.timeout = 2000ms;
  c.api_key_env = "MIMETIC_TEST_KEY";
  return c;
}

struct Sleeps {
  std::vector<std::chrono::milliseconds> calls;
  ChatCompletionBackend::Sleeper fn() {
    return [this](std::chrono::milliseconds d) { calls.push_back(d); };
  }
};

}  // namespace

TEST(Endpoint, Split) {
  const Endpoint e = split_endpoint("https://api.example.com/v1/");
  EXPECT_EQ(e.origin, "https://api.example.com");
  EXPECT_EQ(e.path, "/v1");
  EXPECT_EQ(split_endpoint("http://localhost:8000").path, "");
  EXPECT_THROW(split_endpoint("api.example.com/v1"), ConfigError);
  EXPECT_THROW(split_endpoint("ftp://x/v1"), ConfigError);
  EXPECT_THROW(split_endpoint("http:///v1"), ConfigError);
}

TEST(RequestBody, Shape) {
  BackendConfig c;
  c.model = "m";
  c.max_tokens = 99;
  const auto body = chat_request_body(c, "hello {poem}");
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["max_tokens"], 99);
  ASSERT_EQ(body["messages"].size(), 1u);
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], "hello {poem}");
}

TEST(ResponseBody, Parse) {
  EXPECT_EQ(parse_chat_response(reply_with("hi")), "hi");
  EXPECT_THROW(parse_chat_response("not json"), std::runtime_error);
  EXPECT_THROW(parse_chat_response("{\"choices\":[]}"), std::runtime_error);
  EXPECT_THROW(parse_chat_response("{\"choices\":[{\"message\":{}}]}"), std::runtime_error);
}

TEST(ChatBackend, SendsPromptAndKey) {
  setenv("MIMETIC_TEST_KEY", "sk-test-123", 1);
  std::string auth;
  std::string prompt;
  MockServer server([&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    prompt = nlohmann::json::parse(req.body)["messages"][0]["content"];
    res.set_content(reply_with("a quiet answer"), "application/json");
  });
  ChatCompletionBackend backend(config_for(server));
  EXPECT_TRUE(backend.has_credential());
  EXPECT_EQ(backend.complete({"the prompt", Mode::Interpret, "poem", 1}), "a quiet answer");
  EXPECT_EQ(auth, "Bearer sk-test-123");
  EXPECT_EQ(prompt, "the prompt");
  EXPECT_EQ(backend.name(), "chat:test-model");
  unsetenv("MIMETIC_TEST_KEY");
}

TEST(ChatBackend, RetriesServerErrorsWithBackoff) {
  std::atomic<int> calls{0};
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = calls == 1 ? 503 : 429;
      return;
    }
    res.set_content(reply_with("third time"), "application/json");
  });
  Sleeps sleeps;
  ChatCompletionBackend backend(config_for(server), sleeps.fn());
  EXPECT_EQ(backend.complete({"p", Mode::Ideate, "x", 2}), "third time");
  EXPECT_EQ(calls.load(), 3);
  EXPECT_EQ(sleeps.calls, (std::vector<std::chrono::milliseconds>{500ms, 1000ms}));
}

TEST(ChatBackend, GivesUpAfterRetries) {
  std::atomic<int> calls{0};
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 500;
  });
  Sleeps sleeps;
  ChatCompletionBackend backend(config_for(server), sleeps.fn());
  EXPECT_THROW(backend.complete({"p", Mode::Ideate, "x", 1}), std::runtime_error);
  EXPECT_EQ(calls.load(), 3);
}

TEST(ChatBackend, ClientErrorsAreNotRetried) {
  std::atomic<int> calls{0};
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 401;
    res.set_content("{\"error\":\"bad key\"}", "application/json");
  });
  ChatCompletionBackend backend(config_for(server), Sleeps{}.fn());
  EXPECT_THROW(backend.complete({"p", Mode::Ideate, "x", 1}), std::runtime_error);
  EXPECT_EQ(calls.load(), 1);
}

TEST(ChatBackend, TransportFailureSurfacesAsChainError) {
  BackendConfig c;
  c.endpoint = "http://127.0.0.1:1/v1";
  c.timeout = 200ms;
  c.retries = 1;
  Sleeps sleeps;
  ChatCompletionBackend backend(c, sleeps.fn());
  try {
    run_chain(Mode::Collaborate, "human", backend);
    FAIL();
  } catch (const ChainError& e) {
    EXPECT_EQ(e.stage(), 1);
  }
  EXPECT_EQ(sleeps.calls.size(), 1u);
}

TEST(ChatBackend, CredentialNeverInErrors) {
  setenv("MIMETIC_TEST_KEY", "sk-secret-999", 1);
  MockServer server([&](const httplib::Request& req, httplib::Response& res) {
    // A misbehaving server that echoes the header back.
    res.status = 400;
    res.set_content("invalid " + req.get_header_value("Authorization"), "text/plain");
  });
  ChatCompletionBackend backend(config_for(server), Sleeps{}.fn());
  try {
    backend.complete({"p", Mode::Ideate, "x", 1});
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_EQ(std::string(e.what()).find("sk-secret-999"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[redacted]"), std::string::npos);
  }
  unsetenv("MIMETIC_TEST_KEY");
}

TEST(ChatBackend, ConfigValidated) {
  BackendConfig c;
  c.retries = -1;
  EXPECT_THROW(ChatCompletionBackend{c}, ConfigError);
  c = BackendConfig{};
  c.endpoint = "nowhere";
  EXPECT_THROW(ChatCompletionBackend{c}, ConfigError);
}
