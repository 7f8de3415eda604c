#include "pairforge/gateway.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <random>
#include <thread>

#include "pairforge/digest.hpp"
#include "pairforge/text.hpp"

namespace pairforge {

namespace {

std::int64_t jittered_backoff_ms(int initial_ms, int attempt) {
  if (initial_ms <= 0) return 0;
  std::int64_t base = initial_ms;
  for (int i = 1; i < attempt; ++i) base *= 2;
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_int_distribution<std::int64_t> jitter(0, base / 2);
  return base + jitter(rng);
}

}  // namespace

std::string CompletionRequest::digest() const {
  return prompt_digest(system.value_or(""), user);
}

CompletionRequest CompletionRequest::normalized() const {
  CompletionRequest req = *this;
  if (req.allowed_outputs) {
    req.max_tokens = 1;
    req.temperature = 0.0;
  }
  if (req.n < 1) {
    throw std::invalid_argument("completion request needs n >= 1");
  }
  if (req.temperature < 0.0) {
    throw std::invalid_argument("temperature must be >= 0");
  }
  if (req.top_p <= 0.0 || req.top_p > 1.0) {
    throw std::invalid_argument("top_p must be in (0,1]");
  }
  if (req.max_tokens && *req.max_tokens < 1) {
    throw std::invalid_argument("max_tokens must be positive when set");
  }
  return req;
}

// ---------------------------------------------------------------------------
// MockBackend

MockBackend::MockBackend(Script script, std::int64_t seed)
    : script_(std::move(script)), seed_(seed) {}

std::shared_ptr<MockBackend> MockBackend::from_script_file(
    const std::string& path, std::int64_t seed) {
  Json j = Json::parse(read_file(path));
  Script script;
  for (const auto& [digest, outputs] : j.at("outputs").items()) {
    script[digest] = outputs.get<std::vector<std::string>>();
  }
  auto backend = std::make_shared<MockBackend>(std::move(script), seed);
  if (j.contains("failures")) {
    for (const auto& [digest, count] : j.at("failures").items()) {
      backend->fail_next(digest, count.get<int>());
    }
  }
  return backend;
}

void MockBackend::fail_next(const std::string& digest, int times) {
  std::lock_guard<std::mutex> lock(mu_);
  failures_[digest] += times;
}

CompletionResult MockBackend::complete_once(const CompletionRequest& req) {
  request_count_.fetch_add(1);
  int now = in_flight_.fetch_add(1) + 1;
  int seen = max_in_flight_.load();
  while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
  }
  struct Exit {
    std::atomic<int>& counter;
    ~Exit() { counter.fetch_sub(1); }
  } exit_guard{in_flight_};

  if (artificial_delay_ms_ > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(artificial_delay_ms_));
  }

  const std::string digest = req.digest();
  std::lock_guard<std::mutex> lock(mu_);
  if (auto it = failures_.find(digest); it != failures_.end() && it->second > 0) {
    --it->second;
    throw TransientError("scripted transient failure", digest);
  }
  auto it = script_.find(digest);
  if (it == script_.end()) {
    throw UnscriptedPromptError("unscripted prompt, digest " + digest, digest);
  }
  const std::vector<std::string>& outputs = it->second;
  if (outputs.empty()) {
    throw UnscriptedPromptError("empty script for digest " + digest, digest);
  }
  CompletionResult result;
  result.backend_id = id();
  std::size_t& cursor = cursors_[digest];
  for (int i = 0; i < req.n; ++i) {
    result.texts.push_back(outputs[cursor % outputs.size()]);
    ++cursor;
  }
  return result;
}

std::string MockBackend::id() const {
  return "mock:" + std::to_string(seed_);
}

// ---------------------------------------------------------------------------
// Gateway

struct Gateway::Gate {
  explicit Gate(int cap) : capacity(cap) {}
  void acquire() {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] { return in_use < capacity; });
    ++in_use;
  }
  void release() {
    {
      std::lock_guard<std::mutex> lock(mu);
      --in_use;
    }
    cv.notify_one();
  }
  int capacity;
  int in_use = 0;
  std::mutex mu;
  std::condition_variable cv;
};

Gateway::Gateway(GatewayConfig config)
    : config_(std::move(config)),
      gate_(std::make_unique<Gate>(std::max(1, config_.concurrency_cap))) {}

Gateway::~Gateway() = default;

CompletionResult Gateway::complete(Backend& backend,
                                   const CompletionRequest& raw_req) {
  CompletionRequest req = raw_req.normalized();
  const std::string digest = req.digest();
  const int attempts = std::max(1, config_.max_attempts);
  for (int attempt = 1;; ++attempt) {
    gate_->acquire();
    struct Release {
      Gate* gate;
      ~Release() { gate->release(); }
    } release{gate_.get()};

    auto start = std::chrono::steady_clock::now();
    try {
      CompletionResult result = backend.complete_once(req);
      result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - start)
                              .count();
      if (static_cast<int>(result.texts.size()) != req.n) {
        throw ProtocolError("backend returned " +
                                std::to_string(result.texts.size()) +
                                " texts, expected " + std::to_string(req.n),
                            digest);
      }
      if (req.allowed_outputs) {
        for (const std::string& text : result.texts) {
          if (!req.allowed_outputs->count(std::string(trim(text)))) {
            throw ProtocolError("constrained decode returned \"" + text +
                                    "\" outside the allowed set",
                                digest);
          }
        }
      }
      if (config_.trace) {
        Json entry;
        entry["digest"] = digest;
        entry["backend"] = backend.id();
        entry["n"] = req.n;
        entry["attempt"] = attempt;
        entry["outcome"] = "ok";
        entry["latency_ms"] = result.latency_ms;
        config_.trace(entry);
      }
      return result;
    } catch (const TransientError& e) {
      if (config_.trace) {
        Json entry;
        entry["digest"] = digest;
        entry["backend"] = backend.id();
        entry["n"] = req.n;
        entry["attempt"] = attempt;
        entry["outcome"] = "transient";
        entry["error"] = e.what();
        config_.trace(entry);
      }
      if (attempt >= attempts) {
        throw RetryExhaustedError("retry budget exhausted after " +
                                      std::to_string(attempt) +
                                      " attempts: " + e.what(),
                                  digest);
      }
    }
    std::int64_t delay = jittered_backoff_ms(config_.initial_backoff_ms, attempt);
    if (delay > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
  }
}

bool Gateway::constrained_binary(Backend& backend, CompletionRequest req) {
  req.allowed_outputs = std::set<std::string>{"True", "False"};
  req.n = 1;
  CompletionResult result = complete(backend, req);
  return trim(result.texts.at(0)) == "True";
}

}  // namespace pairforge
