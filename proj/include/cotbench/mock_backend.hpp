#pragma once

// Deterministic scripted chat backend for offline runs and tests.
//
// Each route pairs a request matcher with an ordered list of canned replies.
// A request is served by the first matching route that still has replies;
// a request that matches only exhausted routes raises MockScriptError.

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "cotbench/gateway.hpp"

namespace cotbench {

class MockScriptError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

struct MockFailure {
  enum class Kind { Transient, Timeout, Terminal };
  Kind kind = Kind::Transient;
  int status = 503;
  std::string body;
};

using MockReply = std::variant<ChatResponse, MockFailure>;

MockReply reply_text(std::string text);
MockReply reply_candidates(std::vector<Candidate> candidates);
MockReply fail_transient(int status = 503);
MockReply fail_timeout();
MockReply fail_terminal(int status, std::string body);

struct RouteMatcher {
  std::function<bool(const ChatRequest&)> predicate;
  std::string description;

  /// Default matcher: exact SHA-256 of the request's concatenated text.
  static RouteMatcher exact(const ChatRequest& request);
  static RouteMatcher hash(std::string text_hash);
  static RouteMatcher substring(std::string needle);
  static RouteMatcher any();
};

class MockRoute {
 public:
  MockRoute(RouteMatcher matcher, std::vector<MockReply> replies, std::string name);

  std::size_t consumed() const;
  std::size_t remaining() const;
  const std::string& name() const { return name_; }

 private:
  friend class MockBackend;

  RouteMatcher matcher_;
  std::vector<MockReply> replies_;
  std::string name_;
  std::atomic<std::size_t> next_{0};
};

using MockHandle = std::shared_ptr<MockRoute>;

class MockBackend final : public ChatBackend {
 public:
  explicit MockBackend(bool multi_sample = true) : multi_sample_(multi_sample) {}

  MockHandle script(RouteMatcher matcher, std::vector<MockReply> replies);

  ChatResponse send(const EndpointConfig& endpoint, const ChatRequest& request) override;
  bool supports_multi_sample() const override { return multi_sample_; }

  /// Every request seen, in arrival order.
  std::vector<ChatRequest> received() const;
  std::size_t call_count() const;

 private:
  bool multi_sample_;
  mutable std::mutex mu_;
  std::vector<MockHandle> routes_;
  std::vector<ChatRequest> received_;
};

/// Loads a script file:
/// {"multi_sample": bool, "routes": [{"match": {"substring": s} | {"hash": h}
///  | {"any": true}, "responses": [{"text": s} | {"candidates": [{"text",
///  "logprob_sum", "token_count"}]} | {"fail": "transient"|"timeout"|
///  "terminal", "status": n, "body": s}]}]}
std::shared_ptr<MockBackend> load_mock_script(const std::filesystem::path& path);
std::shared_ptr<MockBackend> mock_from_json(const Json& j);

}  // namespace cotbench
