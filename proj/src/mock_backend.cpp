#include "cotbench/mock_backend.hpp"

#include "cotbench/util.hpp"

namespace cotbench {

MockReply reply_text(std::string text) {
  ChatResponse r;
  r.candidates.push_back({std::move(text), std::nullopt, std::nullopt});
  return r;
}

MockReply reply_candidates(std::vector<Candidate> candidates) {
  ChatResponse r;
  r.candidates = std::move(candidates);
  return r;
}

MockReply fail_transient(int status) { return MockFailure{MockFailure::Kind::Transient, status, {}}; }

MockReply fail_timeout() { return MockFailure{MockFailure::Kind::Timeout, 0, {}}; }

MockReply fail_terminal(int status, std::string body) {
  return MockFailure{MockFailure::Kind::Terminal, status, std::move(body)};
}

RouteMatcher RouteMatcher::exact(const ChatRequest& request) { return hash(request.text_hash()); }

RouteMatcher RouteMatcher::hash(std::string text_hash) {
  return {[h = text_hash](const ChatRequest& r) { return r.text_hash() == h; },
          "hash:" + text_hash.substr(0, 12)};
}

RouteMatcher RouteMatcher::substring(std::string needle) {
  auto description = "substring:" + needle;
  return {[n = std::move(needle)](const ChatRequest& r) {
            return r.concatenated_text().find(n) != std::string::npos;
          },
          std::move(description)};
}

RouteMatcher RouteMatcher::any() {
  return {[](const ChatRequest&) { return true; }, "any"};
}

MockRoute::MockRoute(RouteMatcher matcher, std::vector<MockReply> replies, std::string name)
    : matcher_(std::move(matcher)), replies_(std::move(replies)), name_(std::move(name)) {}

std::size_t MockRoute::consumed() const { return next_; }

std::size_t MockRoute::remaining() const { return replies_.size() - next_; }

MockHandle MockBackend::script(RouteMatcher matcher, std::vector<MockReply> replies) {
  std::lock_guard lock(mu_);
  auto name = "route" + std::to_string(routes_.size()) + "(" + matcher.description + ")";
  auto route = std::make_shared<MockRoute>(std::move(matcher), std::move(replies), std::move(name));
  routes_.push_back(route);
  return route;
}

ChatResponse MockBackend::send(const EndpointConfig& endpoint, const ChatRequest& request) {
  MockReply reply;
  std::string route_name;
  std::size_t index = 0;
  {
    std::lock_guard lock(mu_);
    received_.push_back(request);
    MockRoute* matched = nullptr;
    MockRoute* exhausted = nullptr;
    for (const auto& route : routes_) {
      if (!route->matcher_.predicate(request)) continue;
      if (route->next_ < route->replies_.size()) {
        matched = route.get();
        break;
      }
      if (!exhausted) exhausted = route.get();
    }
    if (!matched) {
      if (exhausted) {
        throw MockScriptError("script exhausted for " + exhausted->name_ + " (request " +
                              request.text_hash() + ")");
      }
      throw MockScriptError("no script for request " + request.text_hash());
    }
    index = matched->next_++;
    reply = matched->replies_[index];
    route_name = matched->name_;
  }

  if (const auto* failure = std::get_if<MockFailure>(&reply)) {
    switch (failure->kind) {
      case MockFailure::Kind::Transient:
        throw TransientError(failure->status, "mock transient failure (HTTP " +
                                                  std::to_string(failure->status) + ")");
      case MockFailure::Kind::Timeout:
        throw TransientError(0, "mock timeout");
      case MockFailure::Kind::Terminal:
        throw ProtocolError(failure->status, failure->body,
                            "HTTP " + std::to_string(failure->status) + ": " + failure->body);
    }
  }
  auto response = std::get<ChatResponse>(reply);
  if (response.model_id.empty()) response.model_id = endpoint.model_id;
  response.request_id = "mock-" + route_name + "-" + std::to_string(index);
  return response;
}

std::vector<ChatRequest> MockBackend::received() const {
  std::lock_guard lock(mu_);
  return received_;
}

std::size_t MockBackend::call_count() const {
  std::lock_guard lock(mu_);
  return received_.size();
}

namespace {

MockReply reply_from_json(const Json& r) {
  namespace jf = json_field;
  if (r.contains("fail")) {
    const auto kind = jf::string(r, "fail");
    const int status = r.contains("status") ? static_cast<int>(jf::integer(r, "status")) : 503;
    if (kind == "transient") return fail_transient(status);
    if (kind == "timeout") return fail_timeout();
    if (kind == "terminal") return fail_terminal(status, jf::string_or(r, "body", ""));
    throw FormatError("unknown mock failure kind '" + kind + "'");
  }
  if (r.contains("candidates")) {
    std::vector<Candidate> out;
    for (const auto& c : jf::require(r, "candidates")) {
      Candidate cand;
      cand.text = jf::string(c, "text");
      if (c.contains("logprob_sum")) cand.logprob_sum = jf::number(c, "logprob_sum");
      if (c.contains("token_count")) cand.token_count = static_cast<int>(jf::integer(c, "token_count"));
      out.push_back(std::move(cand));
    }
    return reply_candidates(std::move(out));
  }
  return reply_text(jf::string(r, "text"));
}

RouteMatcher matcher_from_json(const Json& m) {
  namespace jf = json_field;
  if (m.contains("substring")) return RouteMatcher::substring(jf::string(m, "substring"));
  if (m.contains("hash")) return RouteMatcher::hash(jf::string(m, "hash"));
  if (m.contains("any")) return RouteMatcher::any();
  throw FormatError("mock route matcher needs substring, hash or any");
}

}  // namespace

std::shared_ptr<MockBackend> mock_from_json(const Json& j) {
  namespace jf = json_field;
  const bool multi = j.contains("multi_sample") ? jf::boolean(j, "multi_sample") : true;
  auto backend = std::make_shared<MockBackend>(multi);
  for (const auto& route : jf::require(j, "routes")) {
    std::vector<MockReply> replies;
    for (const auto& r : jf::require(route, "responses")) replies.push_back(reply_from_json(r));
    backend->script(matcher_from_json(jf::require(route, "match")), std::move(replies));
  }
  return backend;
}

std::shared_ptr<MockBackend> load_mock_script(const std::filesystem::path& path) {
  try {
    return mock_from_json(Json::parse(read_file(path)));
  } catch (const Json::exception& e) {
    throw FormatError("mock script " + path.string() + ": " + e.what());
  }
}

}  // namespace cotbench
