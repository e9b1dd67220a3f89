#pragma once

// Semi-automatic benchmark curation.
//
// A judge-class model drafts a reasoning chain per question; human verifiers
// then edit, extend, trim, accept or reject it. Every change is an event in an
// append-only log, and a sample's current state is the fold of its events
// over the seed record. Legal lifecycle:
//
//   Pending --Generated--> InReview --(edits)*--> Accepted | Rejected
//
// Nothing may follow Accepted or Rejected.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cotbench/core.hpp"
#include "cotbench/dataset.hpp"
#include "cotbench/gateway.hpp"
#include "cotbench/util.hpp"

namespace cotbench {

struct GenerationTask {
  std::string sample_id;
  std::string question;
  std::optional<std::vector<std::string>> choices;
  std::optional<ImageRef> image;
  EndpointConfig target_endpoint;
};

class GenerationParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses the "Step n: / Action n: / Final Answer:" reply layout. Each Step
/// and its Action merge into one step text. Throws GenerationParseError.
ReasoningChain parse_generated_chain(std::string_view reply);

/// Sends the chain-generation system prompt with the question (and image)
/// and parses the reply. Throws GenerationParseError or GatewayError.
ReasoningChain generate_chain(Gateway& gateway, const GenerationTask& task,
                              CallLedger* scope = nullptr);

namespace event {
struct Generated {
  ReasoningChain chain;
};
struct EditedStep {
  int index = 0;  // 1-based
  std::string new_text;
};
struct StepAdded {
  int position = 0;  // 1-based insertion point, 1..steps+1
  std::string text;
};
struct StepRemoved {
  int index = 0;
};
struct FinalAnswerEdited {
  std::string new_text;
};
struct Accepted {};
struct Rejected {
  std::string reason;
};
}  // namespace event

using EventKind = std::variant<event::Generated, event::EditedStep, event::StepAdded,
                               event::StepRemoved, event::FinalAnswerEdited, event::Accepted,
                               event::Rejected>;

std::string_view kind_name(const EventKind& kind);
/// True for EditedStep, StepAdded, StepRemoved and FinalAnswerEdited.
bool is_edit(const EventKind& kind);

struct VerificationEvent {
  std::string sample_id;
  EventKind kind;
  std::string actor;
  std::int64_t timestamp_ms = 0;
};

/// {sample_id, kind, payload, actor, ts}
Json to_json(const VerificationEvent& e);
/// Throws FormatError.
VerificationEvent event_from_json(const Json& j);

class CurationError : public std::runtime_error {
 public:
  enum class Kind { UnknownSample, IllegalTransition, InvalidEdit, MinSteps, Invalid };

  CurationError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string_view to_string(CurationError::Kind k);

/// Folds one event into a sample. Pure; throws CurationError on an illegal
/// transition, an out-of-range edit, or an Accept whose chain fails
/// validate_sample ("min-steps" among others).
BenchmarkSample apply_to_sample(const BenchmarkSample& sample, const EventKind& kind);

struct CurationStats {
  std::size_t total = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double fraction_with_any_edit = 0.0;
  std::size_t total_steps = 0;
};

Json to_json(const CurationStats& s);

/// Event-sourced sample store. Thread-safe. When opened on a directory, the
/// seeds (seeds.jsonl) and event log (events.jsonl) are persisted there and
/// the store holds the directory's writer lock.
class CurationStore {
 public:
  CurationStore() = default;
  /// Opens (or creates) a persisted store and replays its log.
  explicit CurationStore(const std::filesystem::path& dir);

  /// Registers a Pending sample. Its ground truth may be empty. Throws on a
  /// duplicate id.
  void add_seed(BenchmarkSample seed);

  /// Validates, folds and appends. Returns the new state.
  BenchmarkSample apply_event(const VerificationEvent& e);

  std::optional<BenchmarkSample> sample(const std::string& id) const;
  std::vector<VerificationEvent> history(const std::string& id) const;
  std::vector<VerificationEvent> events() const;
  /// Sample ids in seed order.
  std::vector<std::string> ids() const;
  std::vector<BenchmarkSample> samples() const;
  std::vector<BenchmarkSample> seeds() const;

  CurationStats stats() const;

  /// Accepted samples only, in seed order.
  Dataset accepted_dataset(std::string name = "curated") const;

  /// Rebuilds every sample state from seeds + events.
  static std::map<std::string, BenchmarkSample> replay(const std::vector<BenchmarkSample>& seeds,
                                                       const std::vector<VerificationEvent>& events);

 private:
  void load(const std::filesystem::path& dir);

  mutable std::mutex mu_;
  std::vector<std::string> order_;
  std::map<std::string, BenchmarkSample> seeds_;
  std::map<std::string, BenchmarkSample> current_;
  std::vector<VerificationEvent> events_;
  std::optional<std::filesystem::path> dir_;
  std::unique_ptr<FileLock> lock_;
};

/// Question file for generation: JSONL of {id, category, question, choices?,
/// image, provenance?, min_step_exempt?}. Returns Pending seeds.
std::vector<BenchmarkSample> load_seed_questions(const std::filesystem::path& path);

struct GenerationReport {
  std::size_t generated = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // id, error
};

/// Drafts chains for every Pending seed concurrently (at most `concurrency`
/// at a time) and records a Generated event for each success. Failed samples
/// stay Pending.
GenerationReport run_generation(CurationStore& store, Gateway& gateway,
                                const EndpointConfig& target, std::size_t concurrency,
                                const std::string& actor = "generator");

struct ReviewLease {
  std::string sample_id;
  std::string reviewer;
  std::chrono::steady_clock::time_point expires_at;
};

/// At most one live lease per sample. Granting to the current holder renews.
class LeaseManager {
 public:
  LeaseManager(std::shared_ptr<Clock> clock, std::chrono::seconds ttl);

  /// Returns the lease, or nullopt when another reviewer holds a live one.
  std::optional<ReviewLease> acquire(const std::string& sample_id, const std::string& reviewer);
  bool holds(const std::string& sample_id, const std::string& reviewer) const;
  bool is_leased(const std::string& sample_id) const;
  void release(const std::string& sample_id);
  std::chrono::seconds ttl() const { return ttl_; }

 private:
  std::shared_ptr<Clock> clock_;
  std::chrono::seconds ttl_;
  mutable std::mutex mu_;
  std::map<std::string, ReviewLease> leases_;
};

}  // namespace cotbench
