#pragma once

// Uniform chat-completions access to target and judge models.
//
// Gateway::complete() owns per-endpoint admission control (bounded in-flight
// requests), a sliding-window rate limiter, retries with exponential backoff
// for transient failures, and exact call accounting in a CallLedger.
// Backends (HTTP, scripted mock) only translate a single request.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cotbench/core.hpp"
#include "cotbench/json_codec.hpp"

namespace cotbench {

using Millis = std::chrono::milliseconds;

enum class Purpose { Generation, Judge };

std::string_view to_string(Purpose p);

struct ContentPart {
  std::string text;
  std::optional<ImageRef> image;

  static ContentPart of_text(std::string t) { return {std::move(t), std::nullopt}; }
  static ContentPart of_image(ImageRef img) { return {{}, std::move(img)}; }
  bool is_image() const { return image.has_value(); }
};

struct ChatMessage {
  std::string role;  // "user" | "assistant"
  std::vector<ContentPart> parts;

  static ChatMessage user_text(std::string text);
  static ChatMessage assistant_text(std::string text);
};

struct ChatRequest {
  std::optional<std::string> system;
  std::vector<ChatMessage> messages;
  int max_tokens = 512;
  double temperature = 0.0;
  int n = 1;
  /// A response_format object (JSON text) for schema-constrained output.
  std::optional<std::string> response_schema;
  bool logprobs = false;

  /// Throws std::invalid_argument: messages empty, n < 1, max_tokens < 1,
  /// temperature < 0.
  void validate() const;
  /// System text followed by every text part, joined by '\n'.
  std::string concatenated_text() const;
  /// SHA-256 of concatenated_text(); the mock's default route key.
  std::string text_hash() const;
};

struct Candidate {
  std::string text;
  std::optional<double> logprob_sum;
  std::optional<int> token_count;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct ChatResponse {
  std::vector<Candidate> candidates;
  std::string model_id;
  Millis latency{0};
  std::string request_id;
  /// Samples lost when an n > 1 request was expanded into single requests.
  std::size_t failed_samples = 0;

  const std::string& text() const { return candidates.at(0).text; }
};

struct EndpointConfig {
  std::string base_url;
  std::string model_id;
  std::string api_key_env;
  int max_in_flight = 4;
  int requests_per_minute = 60;
  int max_retries = 3;
  Millis timeout{60000};
  Millis initial_backoff{500};
  bool supports_response_schema = true;

  /// Throws ConfigError on empty base_url/model_id or non-positive limits.
  void validate() const;
  std::string key() const { return base_url + "|" + model_id; }
};

/// Parses {base_url, model_id, api_key_env, max_in_flight,
/// requests_per_minute, max_retries, timeout_ms, initial_backoff_ms,
/// supports_response_schema}. Unknown keys are ignored.
EndpointConfig endpoint_from_json(const Json& j);
/// api_key_env is echoed by name only; its value is never read here.
Json to_json(const EndpointConfig& e);

class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

/// Retriable failure raised by a backend: HTTP 429/5xx, timeouts, dropped
/// connections (status 0).
class TransientError : public GatewayError {
 public:
  TransientError(int status, const std::string& message)
      : GatewayError(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Retries exhausted.
class TransportError : public GatewayError {
 public:
  TransportError(int attempts, const std::string& message)
      : GatewayError(message), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

/// Terminal non-2xx status or malformed response body.
class ProtocolError : public GatewayError {
 public:
  ProtocolError(int status, std::string body_excerpt, const std::string& message)
      : GatewayError(message), status_(status), body_excerpt_(std::move(body_excerpt)) {}
  int status() const { return status_; }
  const std::string& body_excerpt() const { return body_excerpt_; }

 private:
  int status_;
  std::string body_excerpt_;
};

class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  using duration = std::chrono::steady_clock::duration;

  virtual ~Clock() = default;
  virtual time_point now() const = 0;
  virtual void sleep_for(duration d) = 0;
};

class SystemClock final : public Clock {
 public:
  time_point now() const override { return std::chrono::steady_clock::now(); }
  void sleep_for(duration d) override;
};

/// Manually driven clock; sleeping advances time instantly.
class VirtualClock final : public Clock {
 public:
  time_point now() const override;
  void sleep_for(duration d) override;
  void advance(duration d);
  duration total_slept() const;

 private:
  mutable std::mutex mu_;
  time_point now_{};
  duration slept_{0};
};

/// Sliding 60-second window: at most `per_minute` dispatches in any window.
class RateLimiter {
 public:
  RateLimiter(int per_minute, std::shared_ptr<Clock> clock);

  /// Blocks (via the clock) until a dispatch is allowed, then records it.
  void acquire();
  std::vector<Clock::time_point> dispatch_times() const;

 private:
  int per_minute_;
  std::shared_ptr<Clock> clock_;
  mutable std::mutex mu_;
  std::deque<Clock::time_point> window_;
  std::vector<Clock::time_point> history_;
};

/// Counting semaphore that also tracks the observed peak.
class AdmissionGate {
 public:
  explicit AdmissionGate(int limit) : limit_(limit) {}

  void acquire();
  void release();
  int peak() const;

 private:
  int limit_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
  int peak_ = 0;
};

struct CallCounts {
  std::uint64_t generation_calls = 0;
  std::uint64_t judge_calls = 0;
  std::uint64_t retried_calls = 0;

  std::uint64_t total() const { return generation_calls + judge_calls; }
  CallCounts operator-(const CallCounts& o) const;
  CallCounts& operator+=(const CallCounts& o);
  friend bool operator==(const CallCounts&, const CallCounts&) = default;
};

Json to_json(const CallCounts& c);
CallCounts call_counts_from_json(const Json& j);

struct CallRecord {
  std::string endpoint;
  Purpose purpose = Purpose::Generation;
  Millis wall_time{0};
};

/// Thread-safe model-call accounting. One record per model call; an n-sample
/// request records n calls.
class CallLedger {
 public:
  void record(const std::string& endpoint, Purpose purpose, Millis wall_time,
              std::uint64_t calls = 1);
  void record_retry();
  CallCounts counts() const;
  std::vector<CallRecord> records() const;

 private:
  mutable std::mutex mu_;
  CallCounts counts_;
  std::vector<CallRecord> records_;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Performs one attempt. Throws TransientError, ProtocolError or any other
  /// GatewayError.
  virtual ChatResponse send(const EndpointConfig& endpoint, const ChatRequest& request) = 0;
  /// Whether a single request may ask for n > 1 candidates.
  virtual bool supports_multi_sample() const { return true; }
};

class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Clock> clock = std::make_shared<SystemClock>());
  ~Gateway();

  /// Routes requests whose endpoint base_url equals `base_url` to `backend`.
  /// Unregistered http(s) URLs use the built-in HTTP backend.
  void register_backend(const std::string& base_url, std::shared_ptr<ChatBackend> backend);

  /// Startup check: config valid, backend resolvable, API key variable set
  /// for HTTP endpoints. Throws ConfigError.
  void check_endpoint(const EndpointConfig& endpoint) const;

  /// Thread-safe. On success the global ledger (and `scope`, if given) gain
  /// one call per returned candidate under `purpose`.
  ChatResponse complete(const EndpointConfig& endpoint, const ChatRequest& request,
                        Purpose purpose, CallLedger* scope = nullptr);

  CallLedger& ledger() { return ledger_; }
  const CallLedger& ledger() const { return ledger_; }

  /// Structured request/response log, one JSON object per attempt.
  void set_log(std::filesystem::path path);

  int peak_in_flight(const EndpointConfig& endpoint) const;
  std::vector<Clock::time_point> dispatch_times(const EndpointConfig& endpoint) const;

 private:
  struct EndpointState;

  EndpointState& state_for(const EndpointConfig& endpoint);
  std::shared_ptr<ChatBackend> backend_for(const EndpointConfig& endpoint) const;
  ChatResponse complete_single(const EndpointConfig& endpoint, const ChatRequest& request,
                               ChatBackend& backend, CallLedger* scope);
  void log_attempt(const EndpointConfig& endpoint, const ChatRequest& request, int attempt,
                   const ChatResponse* response, const std::string* error);

  std::shared_ptr<Clock> clock_;
  CallLedger ledger_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<ChatBackend>> backends_;
  mutable std::shared_ptr<ChatBackend> http_backend_;
  std::map<std::string, std::unique_ptr<EndpointState>> states_;
  std::mutex log_mu_;
  std::optional<std::filesystem::path> log_path_;
  std::atomic<std::uint64_t> request_counter_{0};
};

}  // namespace cotbench
