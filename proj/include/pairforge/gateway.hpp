#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pairforge/jsonl.hpp"

namespace pairforge {

struct CompletionRequest {
  std::optional<std::string> system;
  std::string user;  // fully rendered prompt
  double temperature = 0.0;
  double top_p = 1.0;
  std::optional<int> max_tokens;  // nullopt = unlimited
  int n = 1;
  std::optional<std::set<std::string>> allowed_outputs;
  std::optional<std::int64_t> seed;

  std::string digest() const;

  // Applies the type invariants: a constrained request is forced to
  // max_tokens=1 at temperature 0. Throws std::invalid_argument on an
  // invalid request (n < 1, top_p outside (0,1], ...).
  CompletionRequest normalized() const;
};

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct CompletionResult {
  std::vector<std::string> texts;  // length == request.n
  std::string backend_id;
  std::int64_t latency_ms = 0;
  std::optional<TokenUsage> usage;
};

// Error taxonomy. Transient failures are retried by the gateway; everything
// else surfaces to the calling stage.
struct GatewayError : std::runtime_error {
  GatewayError(const std::string& msg, std::string digest_hex = {})
      : std::runtime_error(msg), digest(std::move(digest_hex)) {}
  std::string digest;
};
struct TransientError : GatewayError {
  using GatewayError::GatewayError;
};
struct RetryExhaustedError : GatewayError {
  using GatewayError::GatewayError;
};
struct ProtocolError : GatewayError {
  using GatewayError::GatewayError;
};
struct UnscriptedPromptError : GatewayError {
  using GatewayError::GatewayError;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResult complete_once(const CompletionRequest& req) = 0;
  virtual std::string id() const = 0;
};

// Deterministic test double. Outputs are scripted per prompt digest and
// consumed round-robin: a request for n texts takes the next n entries,
// wrapping at the end of the list, so replaying the same request sequence
// replays the same results. Scripted failures are thrown (as transient
// errors) before any output is consumed.
class MockBackend : public Backend {
 public:
  using Script = std::map<std::string, std::vector<std::string>>;

  MockBackend(Script script, std::int64_t seed);

  static std::shared_ptr<MockBackend> from_script_file(const std::string& path,
                                                       std::int64_t seed);

  CompletionResult complete_once(const CompletionRequest& req) override;
  std::string id() const override;

  void fail_next(const std::string& digest, int times);
  void set_artificial_delay_ms(int ms) { artificial_delay_ms_ = ms; }

  // Concurrency instrumentation for cap-compliance tests.
  int max_in_flight() const { return max_in_flight_.load(); }
  std::size_t request_count() const { return request_count_.load(); }

 private:
  Script script_;
  std::int64_t seed_;
  std::map<std::string, std::size_t> cursors_;
  std::map<std::string, int> failures_;
  std::mutex mu_;
  int artificial_delay_ms_ = 0;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  std::atomic<std::size_t> request_count_{0};
};

// Chat-completions HTTP backend (POST {base_url}/v1/chat/completions with
// model, message list, temperature, top_p, max_tokens, n). The API key is
// read from the named environment variable at construction.
class HttpBackend : public Backend {
 public:
  HttpBackend(std::string base_url, std::string model,
              std::string api_key_env, int timeout_ms = 120000);
  ~HttpBackend() override;

  CompletionResult complete_once(const CompletionRequest& req) override;
  std::string id() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct GatewayConfig {
  int max_attempts = 3;
  int initial_backoff_ms = 1000;
  int concurrency_cap = 4;
  // Redacted request trace (digests and outcomes, never keys or prompt text).
  std::function<void(const Json&)> trace;
};

// Retry, concurrency-cap and output-validation wrapper shared by every stage.
class Gateway {
 public:
  explicit Gateway(GatewayConfig config);
  ~Gateway();

  // Returns exactly req.n texts. Retries transient failures with exponential
  // backoff up to the attempt budget; throws RetryExhaustedError (carrying
  // the request digest) when it runs out. A result violating allowed_outputs
  // is a ProtocolError.
  CompletionResult complete(Backend& backend, const CompletionRequest& req);

  // Single constrained token over {"True","False"}; true iff the trimmed
  // token equals "True".
  bool constrained_binary(Backend& backend, CompletionRequest req);

 private:
  struct Gate;
  GatewayConfig config_;
  std::unique_ptr<Gate> gate_;
};

}  // namespace pairforge
