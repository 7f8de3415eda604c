#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "pairforge/gateway.hpp"
#include "support/test_util.hpp"

using namespace pairforge;

namespace {

// In-process chat-completions server speaking the wire protocol the backend
// expects.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   handle(req, res);
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const {
    return "http://127.0.0.1:" + std::to_string(port_);
  }

  std::atomic<int> fail_with_500{0};
  Json last_request;

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    if (fail_with_500.fetch_sub(1) > 0) {
      res.status = 500;
      res.set_content("overloaded", "text/plain");
      return;
    }
    fail_with_500.store(0);
    last_request = Json::parse(req.body);
    int n = last_request.value("n", 1);
    Json choices = Json::array();
    for (int i = 0; i < n; ++i) {
      Json choice;
      choice["message"] = {{"role", "assistant"},
                           {"content", "echo " + std::to_string(i) + ": " +
                                           last_request["messages"].back()["content"]
                                               .get<std::string>()}};
      choices.push_back(std::move(choice));
    }
    Json body;
    body["choices"] = std::move(choices);
    body["usage"] = {{"prompt_tokens", 12}, {"completion_tokens", 34}};
    res.set_content(body.dump(), "application/json");
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST_CASE("http backend speaks the chat-completions protocol") {
  FakeServer server;
  setenv("PAIRFORGE_TEST_KEY", "sk-test", 1);
  HttpBackend backend(server.base_url(), "test-model", "PAIRFORGE_TEST_KEY",
                      5000);
  auto gateway = pairforge::testing::make_gateway();

  CompletionRequest req;
  req.system = "SYS";
  req.user = "USER";
  req.temperature = 0.8;
  req.top_p = 0.95;
  req.n = 3;
  req.max_tokens = 256;
  auto result = gateway.complete(backend, req);

  REQUIRE(result.texts.size() == 3);
  CHECK(result.texts[0] == "echo 0: USER");
  REQUIRE(result.usage.has_value());
  CHECK(result.usage->prompt_tokens == 12);

  // wire shape
  CHECK(server.last_request["model"] == "test-model");
  CHECK(server.last_request["temperature"] == doctest::Approx(0.8));
  CHECK(server.last_request["top_p"] == doctest::Approx(0.95));
  CHECK(server.last_request["n"] == 3);
  CHECK(server.last_request["max_tokens"] == 256);
  REQUIRE(server.last_request["messages"].size() == 2);
  CHECK(server.last_request["messages"][0]["role"] == "system");
  CHECK(server.last_request["messages"][1]["role"] == "user");
}

TEST_CASE("unlimited max_tokens stays off the wire") {
  FakeServer server;
  HttpBackend backend(server.base_url(), "test-model", "", 5000);
  auto gateway = pairforge::testing::make_gateway();
  CompletionRequest req;
  req.user = "U";
  gateway.complete(backend, req);
  CHECK_FALSE(server.last_request.contains("max_tokens"));
  CHECK_FALSE(server.last_request.contains("seed"));
}

TEST_CASE("5xx responses are retried then succeed") {
  FakeServer server;
  server.fail_with_500.store(2);
  HttpBackend backend(server.base_url(), "test-model", "", 5000);
  auto gateway = pairforge::testing::make_gateway(4, /*attempts=*/3);
  CompletionRequest req;
  req.user = "U";
  auto result = gateway.complete(backend, req);
  CHECK(result.texts.size() == 1);
}

TEST_CASE("a dead endpoint exhausts the retry budget") {
  HttpBackend backend("http://127.0.0.1:1", "test-model", "", 300);
  auto gateway = pairforge::testing::make_gateway(4, /*attempts=*/2);
  CompletionRequest req;
  req.user = "U";
  CHECK_THROWS_AS(gateway.complete(backend, req), RetryExhaustedError);
}
