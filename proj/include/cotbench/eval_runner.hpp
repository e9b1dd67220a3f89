#pragma once

// End-to-end benchmark evaluation: target inference (optionally beam-scaled),
// step scoring and final-answer judging per sample, then aggregation.
//
// Run store: <runs_root>/<run_id>/
//   manifest.json    config, prompt hashes, dataset digest
//   responses.jsonl  one target response per sample
//   scores.jsonl     one SampleResult per sample; presence marks completion
//   report.{json,md,csv}
//
// Re-running an existing run_id resumes it: completed samples are skipped
// and cached responses are judged without re-querying the target.

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cotbench/beam.hpp"
#include "cotbench/dataset.hpp"
#include "cotbench/gateway.hpp"
#include "cotbench/judge.hpp"
#include "cotbench/report.hpp"

namespace cotbench {

struct RunConfig {
  std::filesystem::path dataset_path;
  EndpointConfig target;
  EndpointConfig judge;
  std::optional<BeamConfig> beam;
  std::size_t concurrency = 4;
  std::string run_id;
  std::filesystem::path runs_root = "runs";

  /// Throws ConfigError.
  void validate() const;
  std::filesystem::path run_dir() const { return runs_root / run_id; }
};

Json to_json(const RunConfig& c);

struct SampleError {
  std::string code;
  std::string message;

  friend bool operator==(const SampleError&, const SampleError&) = default;
};

struct SampleResult {
  std::string sample_id;
  std::string model_response;
  std::variant<SampleError, JudgeScorecard> scorecard;
  std::variant<SampleError, FinalAnswerVerdict> verdict;
  CallCounts ledger_delta;

  /// Both judges succeeded.
  bool scored() const;
};

bool operator==(const FinalAnswerVerdict& a, const FinalAnswerVerdict& b);
bool operator==(const SampleResult& a, const SampleResult& b);

Json to_json(const SampleResult& r);
SampleResult sample_result_from_json(const Json& j);

class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunHooks {
  /// Called after each result is persisted. An exception thrown here stops
  /// the run (used to simulate a crash).
  std::function<void(const SampleResult&)> on_result;
};

struct EvaluationRun {
  std::filesystem::path run_dir;
  /// Every result of the run, including resumed ones, sorted by sample_id.
  std::vector<SampleResult> results;
  AggregateReport report;
  /// Samples processed by this invocation (not loaded from a previous one).
  std::size_t processed = 0;
};

/// Throws DatasetError, ConfigError, RunError (run_id reused for a different
/// dataset or a run directory already locked). Per-sample failures are
/// recorded, never thrown.
EvaluationRun run_evaluation(Gateway& gateway, const RunConfig& config, const RunHooks& hooks = {});

/// Results are sorted by sample_id before folding; ids absent from the
/// dataset are ignored.
AggregateReport aggregate(std::vector<SampleResult> results, const Dataset& dataset);

/// Loads scores.jsonl of an existing run. Throws RunError if the run is
/// missing.
std::vector<SampleResult> load_run_results(const std::filesystem::path& run_dir);

}  // namespace cotbench
