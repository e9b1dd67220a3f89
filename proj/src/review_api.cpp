#include "cotbench/review_api.hpp"

#include <charconv>

#include "cotbench/json_codec.hpp"
#include "httplib.h"

namespace cotbench {

namespace {

ApiResponse error(int status, std::string_view code, const std::string& message) {
  return {status, Json{{"error", code}, {"message", message}}};
}

ApiResponse not_found(const std::string& id) {
  return error(404, "NotFound", "unknown sample '" + id + "'");
}

Json summary_json(const BenchmarkSample& s) {
  Json j;
  j["id"] = s.id;
  j["category"] = to_string(s.category);
  j["question"] = s.question;
  j["state"] = to_string(s.verification_state);
  j["steps"] = s.ground_truth.steps.size();
  return j;
}

}  // namespace

ReviewService::ReviewService(CurationStore& store, std::shared_ptr<Clock> clock,
                             std::chrono::seconds lease_ttl)
    : store_(store), clock_(clock), leases_(clock, lease_ttl) {}

ApiResponse ReviewService::queue(const std::optional<std::string>& state,
                                 const std::optional<std::string>& limit) const {
  VerificationState wanted = VerificationState::InReview;
  if (state) {
    if (*state == "Pending") {
      wanted = VerificationState::Pending;
    } else if (*state != "InReview") {
      return error(400, "BadRequest", "state must be Pending or InReview");
    }
  }
  std::size_t max = 50;
  if (limit) {
    const auto* end = limit->data() + limit->size();
    const auto [ptr, ec] = std::from_chars(limit->data(), end, max);
    if (ec != std::errc() || ptr != end) return error(400, "BadRequest", "limit must be a non-negative integer");
  }
  Json items = Json::array();
  for (const auto& s : store_.samples()) {
    if (items.size() >= max) break;
    if (s.verification_state != wanted || leases_.is_leased(s.id)) continue;
    items.push_back(summary_json(s));
  }
  return {200, std::move(items)};
}

ApiResponse ReviewService::lease(const std::string& sample_id, const std::string& body) {
  std::string reviewer;
  try {
    reviewer = json_field::string(Json::parse(body), "reviewer");
  } catch (const std::exception& e) {
    return error(400, "BadRequest", std::string("lease body needs a reviewer: ") + e.what());
  }
  if (trim(reviewer).empty()) return error(400, "BadRequest", "reviewer is empty");

  std::lock_guard lock(mu_);
  const auto s = store_.sample(sample_id);
  if (!s) return not_found(sample_id);
  if (s->verification_state == VerificationState::Accepted ||
      s->verification_state == VerificationState::Rejected) {
    return error(409, "IllegalTransition", "sample '" + sample_id + "' is already " +
                                               std::string(to_string(s->verification_state)));
  }
  const auto granted = leases_.acquire(sample_id, reviewer);
  if (!granted) return error(423, "Locked", "sample '" + sample_id + "' is leased by another reviewer");
  const auto remaining =
      std::chrono::duration_cast<std::chrono::milliseconds>(granted->expires_at - clock_->now());
  return {200, Json{{"sample_id", sample_id},
                    {"reviewer", reviewer},
                    {"expires_in_ms", remaining.count()}}};
}

ApiResponse ReviewService::post_event(const std::string& sample_id, const std::string& body,
                                      const std::string& reviewer_header) {
  VerificationEvent event;
  try {
    Json j = Json::parse(body);
    if (!j.is_object()) throw FormatError("event must be an object");
    if (j.contains("sample_id") && j["sample_id"] != sample_id) {
      throw FormatError("event sample_id does not match the URL");
    }
    j["sample_id"] = sample_id;
    if (!j.contains("actor") || j["actor"].get<std::string>().empty()) j["actor"] = reviewer_header;
    event = event_from_json(j);
  } catch (const std::exception& e) {
    return error(400, "BadRequest", std::string("malformed event: ") + e.what());
  }
  if (event.actor.empty()) return error(400, "BadRequest", "event has no actor or X-Reviewer header");

  std::lock_guard lock(mu_);
  if (!store_.sample(sample_id)) return not_found(sample_id);
  if (!leases_.holds(sample_id, event.actor)) {
    return error(423, "Locked", "reviewer '" + event.actor + "' does not hold the lease on '" +
                                    sample_id + "'");
  }
  try {
    const auto next = store_.apply_event(event);
    if (next.verification_state == VerificationState::Accepted ||
        next.verification_state == VerificationState::Rejected) {
      leases_.release(sample_id);
    }
    return {200, to_json(next)};
  } catch (const CurationError& e) {
    return error(409, to_string(e.kind()), e.what());
  }
}

ApiResponse ReviewService::sample(const std::string& sample_id) const {
  const auto s = store_.sample(sample_id);
  if (!s) return not_found(sample_id);
  Json events = Json::array();
  for (const auto& e : store_.history(sample_id)) events.push_back(to_json(e));
  Json j;
  j["sample"] = to_json(*s);
  j["events"] = std::move(events);
  j["leased"] = leases_.is_leased(sample_id);
  return {200, std::move(j)};
}

ApiResponse ReviewService::stats() const { return {200, to_json(store_.stats())}; }

ReviewServer::ReviewServer(ReviewService& service) : server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type, X-Reviewer"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  const auto send = [](httplib::Response& res, const ApiResponse& api) {
    res.status = api.status;
    res.set_content(api.body.dump(), "application/json");
  };
  const auto param = [](const httplib::Request& req, const char* key) -> std::optional<std::string> {
    if (!req.has_param(key)) return std::nullopt;
    return req.get_param_value(key);
  };

  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  srv.Get("/queue", [&service, send, param](const httplib::Request& req, httplib::Response& res) {
    send(res, service.queue(param(req, "state"), param(req, "limit")));
  });
  srv.Post(R"(/sample/([^/]+)/lease)", [&service, send](const httplib::Request& req,
                                                         httplib::Response& res) {
    send(res, service.lease(req.matches[1], req.body));
  });
  srv.Post(R"(/sample/([^/]+)/events)", [&service, send](const httplib::Request& req,
                                                          httplib::Response& res) {
    send(res, service.post_event(req.matches[1], req.body, req.get_header_value("X-Reviewer")));
  });
  srv.Get(R"(/sample/([^/]+))", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.sample(req.matches[1]));
  });
  srv.Get("/stats", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.stats());
  });
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

bool ReviewServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

void ReviewServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace cotbench
