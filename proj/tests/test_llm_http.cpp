#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "trllm/llm_http.hpp"

using namespace trllm;

namespace {

// Local stub server on an ephemeral port; the handler decides each reply.
class StubServer {
public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&, int call)>;

  explicit StubServer(Handler handler) : handler_(std::move(handler)) {
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      last_auth = req.get_header_value("Authorization");
      last_body = req.body;
      handler_(req, res, calls++);
    };
    server_.Post("/v1/chat/completions", route);
    server_.Post("/v1/embeddings", route);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  LlmEndpointConfig config() const {
    LlmEndpointConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
    cfg.model_name = "stub-model";
    cfg.timeout_s = 5.0;
    cfg.backoff_base_s = 0.0;
    return cfg;
  }

  std::atomic<int> calls{0};
  std::string last_auth;
  std::string last_body;

private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string chat_reply(const std::string& text) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
}

struct EnvGuard {
  explicit EnvGuard(const char* value) {
    if (value) setenv("TRLLM_API_KEY", value, 1);
    else unsetenv("TRLLM_API_KEY");
  }
  ~EnvGuard() { unsetenv("TRLLM_API_KEY"); }
};

}  // namespace

TEST(ChatComplete, RetriesServerErrorsThenSucceeds) {
  EnvGuard env(nullptr);
  StubServer stub([](const httplib::Request&, httplib::Response& res, int call) {
    if (call < 2) {
      res.status = 500;
      return;
    }
    res.set_content(chat_reply("sink: A"), "application/json");
  });
  EXPECT_EQ(chat_complete(stub.config(), "hello"), "sink: A");
  EXPECT_EQ(stub.calls, 3);
  const auto body = nlohmann::json::parse(stub.last_body);
  EXPECT_EQ(body["model"], "stub-model");
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], "hello");
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(stub.last_auth, "");
}

TEST(ChatComplete, RateLimitIsRetried) {
  EnvGuard env(nullptr);
  StubServer stub([](const httplib::Request&, httplib::Response& res, int call) {
    if (call == 0) {
      res.status = 429;
      return;
    }
    res.set_content(chat_reply("ok"), "application/json");
  });
  EXPECT_EQ(chat_complete(stub.config(), "x"), "ok");
  EXPECT_EQ(stub.calls, 2);
}

TEST(ChatComplete, BackoffDoublesFromBase) {
  EnvGuard env(nullptr);
  StubServer stub([](const httplib::Request&, httplib::Response& res, int call) {
    if (call < 2) {
      res.status = 503;
      return;
    }
    res.set_content(chat_reply("ok"), "application/json");
  });
  auto cfg = stub.config();
  cfg.backoff_base_s = 0.1;
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(chat_complete(cfg, "x"), "ok");
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - t0;
  EXPECT_GE(elapsed.count(), 0.3 - 1e-3);  // 0.1 + 0.2
}

TEST(ChatComplete, ClientErrorIsNotRetried) {
  EnvGuard env(nullptr);
  StubServer stub([](const httplib::Request&, httplib::Response& res, int) {
    res.status = 400;
    res.set_content("bad request", "text/plain");
  });
  try {
    chat_complete(stub.config(), "x");
    FAIL() << "expected RequestError";
  } catch (const RequestError& e) {
    EXPECT_EQ(e.status(), 400);
  }
  EXPECT_EQ(stub.calls, 1);
}

TEST(ChatComplete, MalformedBodyIsProtocolError) {
  EnvGuard env(nullptr);
  StubServer stub([](const httplib::Request&, httplib::Response& res, int call) {
    res.set_content(call == 0 ? "{not json" : R"({"choices": []})", "application/json");
  });
  EXPECT_THROW(chat_complete(stub.config(), "x"), ProtocolError);
  EXPECT_THROW(chat_complete(stub.config(), "x"), ProtocolError);
}

TEST(ChatComplete, ExhaustedRetriesIsTransportError) {
  EnvGuard env(nullptr);
  StubServer stub([](const httplib::Request&, httplib::Response& res, int) { res.status = 502; });
  auto cfg = stub.config();
  cfg.max_retries = 2;
  EXPECT_THROW(chat_complete(cfg, "x"), TransportError);
  EXPECT_EQ(stub.calls, 3);
}

TEST(ChatComplete, UnreachableIsTransportError) {
  EnvGuard env(nullptr);
  LlmEndpointConfig cfg;
  cfg.base_url = "http://127.0.0.1:1/v1";
  cfg.max_retries = 1;
  cfg.backoff_base_s = 0.0;
  cfg.timeout_s = 2.0;
  EXPECT_THROW(chat_complete(cfg, "x"), TransportError);
}

TEST(ChatComplete, BearerHeaderAndEnvOverride) {
  StubServer stub([](const httplib::Request&, httplib::Response& res, int) {
    res.set_content(chat_reply("ok"), "application/json");
  });
  auto cfg = stub.config();
  cfg.api_key = "from-config";
  {
    EnvGuard env(nullptr);
    chat_complete(cfg, "x");
    EXPECT_EQ(stub.last_auth, "Bearer from-config");
  }
  {
    EnvGuard env("from-env");
    chat_complete(cfg, "x");
    EXPECT_EQ(stub.last_auth, "Bearer from-env");
  }
}

TEST(ChatComplete, ConfigValidation) {
  LlmEndpointConfig cfg;
  cfg.timeout_s = 0.0;
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg = {};
  cfg.max_retries = -1;
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg = {};
  cfg.base_url = "localhost:8000";
  EXPECT_THROW(chat_complete(cfg, "x"), ContractError);
}

TEST(HttpBackend, ConcurrentCallsShareTheServer) {
  EnvGuard env(nullptr);
  StubServer stub([](const httplib::Request& req, httplib::Response& res, int) {
    const auto body = nlohmann::json::parse(req.body);
    res.set_content(chat_reply("echo " + body["messages"][0]["content"].get<std::string>()), "application/json");
  });
  auto cfg = stub.config();
  cfg.max_parallel = 2;
  const HttpChatBackend backend(cfg);
  std::vector<std::thread> threads;
  std::vector<std::string> out(8);
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] { out[static_cast<std::size_t>(i)] = backend.complete(std::to_string(i)); });
  }
  for (auto& t : threads) t.join();
  for (int i = 0; i < 8; ++i) EXPECT_EQ(out[static_cast<std::size_t>(i)], "echo " + std::to_string(i));
}

TEST(RemoteEmbedder, NormalizesVector) {
  EnvGuard env(nullptr);
  StubServer stub([](const httplib::Request&, httplib::Response& res, int) {
    res.set_content(R"({"data": [{"embedding": [3.0, 4.0]}]})", "application/json");
  });
  const RemoteEmbedder e(stub.config());
  const auto v = e.embed("wash hands");
  ASSERT_EQ(v.size(), 2u);
  EXPECT_NEAR(v[0], 0.6, 1e-12);
  EXPECT_NEAR(v[1], 0.8, 1e-12);
  EXPECT_EQ(nlohmann::json::parse(stub.last_body)["input"], "wash hands");
  EXPECT_THROW(e.embed("   "), ContractError);
}

TEST(RemoteEmbedder, DegenerateReplies) {
  EnvGuard env(nullptr);
  StubServer stub([](const httplib::Request&, httplib::Response& res, int call) {
    res.set_content(call == 0 ? R"({"data": [{"embedding": [0.0, 0.0]}]})" : R"({"data": []})", "application/json");
  });
  const RemoteEmbedder e(stub.config());
  EXPECT_THROW(e.embed("a"), ProtocolError);
  EXPECT_THROW(e.embed("a"), ProtocolError);
}
