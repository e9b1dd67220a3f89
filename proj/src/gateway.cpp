#include "cotbench/gateway.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <future>
#include <thread>

#include "cotbench/http_backend.hpp"
#include "cotbench/util.hpp"

namespace cotbench {

std::string_view to_string(Purpose p) { return p == Purpose::Generation ? "generation" : "judge"; }

ChatMessage ChatMessage::user_text(std::string text) {
  return {"user", {ContentPart::of_text(std::move(text))}};
}

ChatMessage ChatMessage::assistant_text(std::string text) {
  return {"assistant", {ContentPart::of_text(std::move(text))}};
}

void ChatRequest::validate() const {
  if (messages.empty()) throw std::invalid_argument("chat request has no messages");
  if (n < 1) throw std::invalid_argument("chat request n must be >= 1");
  if (max_tokens < 1) throw std::invalid_argument("chat request max_tokens must be >= 1");
  if (!(temperature >= 0.0)) throw std::invalid_argument("chat request temperature must be >= 0");
}

std::string ChatRequest::concatenated_text() const {
  std::string out;
  const auto add = [&out](const std::string& t) {
    if (!out.empty()) out.push_back('\n');
    out += t;
  };
  if (system) add(*system);
  for (const auto& m : messages) {
    for (const auto& p : m.parts) {
      if (!p.is_image()) add(p.text);
    }
  }
  return out;
}

std::string ChatRequest::text_hash() const { return sha256_hex(concatenated_text()); }

void EndpointConfig::validate() const {
  if (base_url.empty()) throw ConfigError("endpoint base_url is empty");
  if (model_id.empty()) throw ConfigError("endpoint model_id is empty");
  if (max_in_flight < 1) throw ConfigError("endpoint max_in_flight must be >= 1");
  if (requests_per_minute < 1) throw ConfigError("endpoint requests_per_minute must be >= 1");
  if (max_retries < 0) throw ConfigError("endpoint max_retries must be >= 0");
  if (timeout.count() <= 0) throw ConfigError("endpoint timeout must be positive");
}

EndpointConfig endpoint_from_json(const Json& j) {
  namespace jf = json_field;
  EndpointConfig e;
  try {
    e.base_url = jf::string(j, "base_url");
    e.model_id = jf::string(j, "model_id");
    e.api_key_env = jf::string_or(j, "api_key_env", "");
    if (j.contains("max_in_flight")) e.max_in_flight = static_cast<int>(jf::integer(j, "max_in_flight"));
    if (j.contains("requests_per_minute")) {
      e.requests_per_minute = static_cast<int>(jf::integer(j, "requests_per_minute"));
    }
    if (j.contains("max_retries")) e.max_retries = static_cast<int>(jf::integer(j, "max_retries"));
    if (j.contains("timeout_ms")) e.timeout = Millis(jf::integer(j, "timeout_ms"));
    if (j.contains("initial_backoff_ms")) {
      e.initial_backoff = Millis(jf::integer(j, "initial_backoff_ms"));
    }
    if (j.contains("supports_response_schema")) {
      e.supports_response_schema = jf::boolean(j, "supports_response_schema");
    }
  } catch (const FormatError& err) {
    throw ConfigError(std::string("endpoint config: ") + err.what());
  }
  e.validate();
  return e;
}

Json to_json(const EndpointConfig& e) {
  Json j;
  j["base_url"] = e.base_url;
  j["model_id"] = e.model_id;
  j["api_key_env"] = e.api_key_env;
  j["max_in_flight"] = e.max_in_flight;
  j["requests_per_minute"] = e.requests_per_minute;
  j["max_retries"] = e.max_retries;
  j["timeout_ms"] = e.timeout.count();
  j["initial_backoff_ms"] = e.initial_backoff.count();
  j["supports_response_schema"] = e.supports_response_schema;
  return j;
}

void SystemClock::sleep_for(duration d) {
  if (d > duration::zero()) std::this_thread::sleep_for(d);
}

Clock::time_point VirtualClock::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

void VirtualClock::sleep_for(duration d) {
  if (d <= duration::zero()) return;
  std::lock_guard lock(mu_);
  now_ += d;
  slept_ += d;
}

void VirtualClock::advance(duration d) {
  std::lock_guard lock(mu_);
  now_ += d;
}

Clock::duration VirtualClock::total_slept() const {
  std::lock_guard lock(mu_);
  return slept_;
}

RateLimiter::RateLimiter(int per_minute, std::shared_ptr<Clock> clock)
    : per_minute_(per_minute), clock_(std::move(clock)) {}

void RateLimiter::acquire() {
  constexpr auto kWindow = std::chrono::seconds(60);
  std::unique_lock lock(mu_);
  for (;;) {
    const auto now = clock_->now();
    while (!window_.empty() && window_.front() + kWindow <= now) window_.pop_front();
    if (static_cast<int>(window_.size()) < per_minute_) {
      window_.push_back(now);
      history_.push_back(now);
      return;
    }
    const auto wait = window_.front() + kWindow - now;
    lock.unlock();
    clock_->sleep_for(wait);
    lock.lock();
  }
}

std::vector<Clock::time_point> RateLimiter::dispatch_times() const {
  std::lock_guard lock(mu_);
  return history_;
}

void AdmissionGate::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < limit_; });
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
}

void AdmissionGate::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

int AdmissionGate::peak() const {
  std::lock_guard lock(mu_);
  return peak_;
}

CallCounts CallCounts::operator-(const CallCounts& o) const {
  return {generation_calls - o.generation_calls, judge_calls - o.judge_calls,
          retried_calls - o.retried_calls};
}

CallCounts& CallCounts::operator+=(const CallCounts& o) {
  generation_calls += o.generation_calls;
  judge_calls += o.judge_calls;
  retried_calls += o.retried_calls;
  return *this;
}

Json to_json(const CallCounts& c) {
  Json j;
  j["generation_calls"] = c.generation_calls;
  j["judge_calls"] = c.judge_calls;
  j["retried_calls"] = c.retried_calls;
  return j;
}

CallCounts call_counts_from_json(const Json& j) {
  namespace jf = json_field;
  return {static_cast<std::uint64_t>(jf::integer(j, "generation_calls")),
          static_cast<std::uint64_t>(jf::integer(j, "judge_calls")),
          static_cast<std::uint64_t>(jf::integer(j, "retried_calls"))};
}

void CallLedger::record(const std::string& endpoint, Purpose purpose, Millis wall_time,
                        std::uint64_t calls) {
  std::lock_guard lock(mu_);
  auto& counter = purpose == Purpose::Generation ? counts_.generation_calls : counts_.judge_calls;
  counter += calls;
  for (std::uint64_t i = 0; i < calls; ++i) records_.push_back({endpoint, purpose, wall_time});
}

void CallLedger::record_retry() {
  std::lock_guard lock(mu_);
  ++counts_.retried_calls;
}

CallCounts CallLedger::counts() const {
  std::lock_guard lock(mu_);
  return counts_;
}

std::vector<CallRecord> CallLedger::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

struct Gateway::EndpointState {
  EndpointState(const EndpointConfig& e, std::shared_ptr<Clock> clock)
      : gate(e.max_in_flight), limiter(e.requests_per_minute, std::move(clock)) {}

  AdmissionGate gate;
  RateLimiter limiter;
};

namespace {

class SlotGuard {
 public:
  explicit SlotGuard(AdmissionGate& gate) : gate_(gate) { gate_.acquire(); }
  ~SlotGuard() { gate_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  AdmissionGate& gate_;
};

bool is_http_url(std::string_view url) {
  return url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0;
}

std::string redact(std::string text, const std::string& secret) {
  if (secret.empty()) return text;
  std::size_t pos = 0;
  while ((pos = text.find(secret, pos)) != std::string::npos) {
    text.replace(pos, secret.size(), "[REDACTED]");
    pos += 10;
  }
  return text;
}

constexpr Millis kMaxBackoff{30000};

}  // namespace

Gateway::Gateway(std::shared_ptr<Clock> clock) : clock_(std::move(clock)) {}

Gateway::~Gateway() = default;

void Gateway::register_backend(const std::string& base_url, std::shared_ptr<ChatBackend> backend) {
  std::lock_guard lock(mu_);
  backends_[base_url] = std::move(backend);
}

std::shared_ptr<ChatBackend> Gateway::backend_for(const EndpointConfig& endpoint) const {
  std::lock_guard lock(mu_);
  if (const auto it = backends_.find(endpoint.base_url); it != backends_.end()) return it->second;
  if (is_http_url(endpoint.base_url)) {
    if (!http_backend_) http_backend_ = std::make_shared<HttpBackend>();
    return http_backend_;
  }
  throw ConfigError("no backend registered for '" + endpoint.base_url + "'");
}

void Gateway::check_endpoint(const EndpointConfig& endpoint) const {
  endpoint.validate();
  backend_for(endpoint);
  bool registered = false;
  {
    std::lock_guard lock(mu_);
    registered = backends_.count(endpoint.base_url) > 0;
  }
  if (!registered && !endpoint.api_key_env.empty() &&
      std::getenv(endpoint.api_key_env.c_str()) == nullptr) {
    throw ConfigError("environment variable " + endpoint.api_key_env + " is not set");
  }
}

Gateway::EndpointState& Gateway::state_for(const EndpointConfig& endpoint) {
  std::lock_guard lock(mu_);
  auto& slot = states_[endpoint.key()];
  if (!slot) slot = std::make_unique<EndpointState>(endpoint, clock_);
  return *slot;
}

int Gateway::peak_in_flight(const EndpointConfig& endpoint) const {
  std::lock_guard lock(mu_);
  const auto it = states_.find(endpoint.key());
  return it == states_.end() ? 0 : it->second->gate.peak();
}

std::vector<Clock::time_point> Gateway::dispatch_times(const EndpointConfig& endpoint) const {
  std::lock_guard lock(mu_);
  const auto it = states_.find(endpoint.key());
  return it == states_.end() ? std::vector<Clock::time_point>{}
                             : it->second->limiter.dispatch_times();
}

void Gateway::set_log(std::filesystem::path path) {
  std::lock_guard lock(log_mu_);
  log_path_ = std::move(path);
}

void Gateway::log_attempt(const EndpointConfig& endpoint, const ChatRequest& request, int attempt,
                          const ChatResponse* response, const std::string* error) {
  std::lock_guard lock(log_mu_);
  if (!log_path_) return;
  Json j;
  j["ts_ms"] = unix_millis_now();
  j["endpoint"] = endpoint.base_url;
  j["model"] = endpoint.model_id;
  j["attempt"] = attempt;
  j["n"] = request.n;
  j["request_hash"] = request.text_hash();
  j["request_text"] = request.concatenated_text();
  if (response) {
    j["outcome"] = "ok";
    j["request_id"] = response->request_id;
    Json texts = Json::array();
    for (const auto& c : response->candidates) texts.push_back(c.text);
    j["candidates"] = std::move(texts);
  } else {
    j["outcome"] = "error";
    j["error"] = error ? *error : std::string("unknown");
  }
  std::string secret;
  if (!endpoint.api_key_env.empty()) {
    if (const char* v = std::getenv(endpoint.api_key_env.c_str())) secret = v;
  }
  append_line(*log_path_, redact(j.dump(), secret));
}

ChatResponse Gateway::complete_single(const EndpointConfig& endpoint, const ChatRequest& request,
                                      ChatBackend& backend, CallLedger* scope) {
  auto& state = state_for(endpoint);
  for (int attempt = 0;; ++attempt) {
    try {
      ChatResponse response;
      {
        SlotGuard slot(state.gate);
        state.limiter.acquire();
        response = backend.send(endpoint, request);
      }
      if (response.request_id.empty()) {
        response.request_id = "req-" + std::to_string(++request_counter_);
      }
      log_attempt(endpoint, request, attempt, &response, nullptr);
      return response;
    } catch (const TransientError& e) {
      const std::string msg = e.what();
      log_attempt(endpoint, request, attempt, nullptr, &msg);
      if (attempt >= endpoint.max_retries) {
        throw TransportError(attempt + 1, "giving up on " + endpoint.base_url + " after " +
                                              std::to_string(attempt + 1) + " attempts: " + msg);
      }
      ledger_.record_retry();
      if (scope) scope->record_retry();
      const auto backoff =
          std::min<Millis>(endpoint.initial_backoff * (1LL << std::min(attempt, 16)), kMaxBackoff);
      clock_->sleep_for(backoff);
    } catch (const GatewayError& e) {
      const std::string msg = e.what();
      log_attempt(endpoint, request, attempt, nullptr, &msg);
      throw;
    }
  }
}

ChatResponse Gateway::complete(const EndpointConfig& endpoint, const ChatRequest& request,
                               Purpose purpose, CallLedger* scope) {
  request.validate();
  endpoint.validate();
  const auto backend = backend_for(endpoint);
  const auto started = std::chrono::steady_clock::now();

  ChatResponse response;
  if (request.n > 1 && !backend->supports_multi_sample()) {
    ChatRequest single = request;
    single.n = 1;
    std::vector<std::future<ChatResponse>> pending;
    pending.reserve(static_cast<std::size_t>(request.n));
    for (int i = 0; i < request.n; ++i) {
      pending.push_back(std::async(std::launch::async, [&, backend] {
        return complete_single(endpoint, single, *backend, scope);
      }));
    }
    std::exception_ptr first_error;
    for (auto& f : pending) {
      try {
        auto part = f.get();
        if (response.model_id.empty()) {
          response.model_id = part.model_id;
          response.request_id = part.request_id;
        }
        response.latency = std::max(response.latency, part.latency);
        response.candidates.push_back(std::move(part.candidates.at(0)));
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
        ++response.failed_samples;
      }
    }
    if (response.candidates.empty()) std::rethrow_exception(first_error);
  } else {
    response = complete_single(endpoint, request, *backend, scope);
    if (response.candidates.empty()) {
      throw ProtocolError(200, {}, "backend returned no candidates");
    }
    if (request.n > 1 && static_cast<int>(response.candidates.size()) != request.n) {
      throw ProtocolError(200, {},
                          "requested " + std::to_string(request.n) + " candidates, got " +
                              std::to_string(response.candidates.size()));
    }
  }

  const auto wall =
      std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - started);
  ledger_.record(endpoint.key(), purpose, wall, response.candidates.size());
  if (scope) scope->record(endpoint.key(), purpose, wall, response.candidates.size());
  return response;
}

}  // namespace cotbench
