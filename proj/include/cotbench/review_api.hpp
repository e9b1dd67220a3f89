#pragma once

// HTTP/JSON surface for the annotator UI, a thin layer over CurationStore.
//
//   GET  /queue?state=Pending|InReview&limit=N
//   POST /sample/{id}/lease    {"reviewer": "..."}
//   POST /sample/{id}/events   event-log encoding of one VerificationEvent
//   GET  /sample/{id}
//   GET  /stats
//
// Events must be posted by the reviewer holding the sample's lease; the
// reviewer is the event's "actor", or the X-Reviewer header when absent.
// Status codes: 400 bad request, 404 unknown sample, 409 illegal transition
// (body "error" is "min-steps" for a too-short Accept), 423 lease conflict.

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "cotbench/curation.hpp"

namespace httplib {
class Server;
}

namespace cotbench {

inline constexpr std::chrono::seconds kDefaultLeaseTtl{15 * 60};

struct ApiResponse {
  int status = 200;
  Json body;
};

/// Transport-free handlers; ReviewServer only maps HTTP onto these.
class ReviewService {
 public:
  ReviewService(CurationStore& store, std::shared_ptr<Clock> clock = std::make_shared<SystemClock>(),
                std::chrono::seconds lease_ttl = kDefaultLeaseTtl);

  ApiResponse queue(const std::optional<std::string>& state,
                    const std::optional<std::string>& limit) const;
  ApiResponse lease(const std::string& sample_id, const std::string& body);
  ApiResponse post_event(const std::string& sample_id, const std::string& body,
                         const std::string& reviewer_header = {});
  ApiResponse sample(const std::string& sample_id) const;
  ApiResponse stats() const;

  LeaseManager& leases() { return leases_; }

 private:
  CurationStore& store_;
  std::shared_ptr<Clock> clock_;
  LeaseManager leases_;
  // Lease checks and event appends happen under one lock so that a lease
  // cannot change hands between the check and the append.
  mutable std::mutex mu_;
};

class ReviewServer {
 public:
  explicit ReviewServer(ReviewService& service);
  ~ReviewServer();

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port; throws std::runtime_error if binding fails.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace cotbench
