#pragma once

// Inference scaling by sampling several complete responses and keeping one.
//
// beam_generate: B full responses from a single n=B request (or B parallel
// single requests when the backend cannot multi-sample), then one selection.
// Model calls: B generations, at most one judge call.
//
// stage_level_generate: the four-stage baseline. Every stage samples B
// candidates conditioned on the previous winners and runs a pairwise knockout
// of B-1 judge comparisons. Model calls: 4B generations, 4(B-1) judge calls.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cotbench/gateway.hpp"
#include "cotbench/stages.hpp"

namespace cotbench {

enum class SelectionStrategy { Auto, LogProb, JudgeRank, MajorityAnswer };

std::string_view to_string(SelectionStrategy s);
std::optional<SelectionStrategy> parse_strategy(std::string_view s);

struct BeamConfig {
  int num_beams = 1;
  SelectionStrategy strategy = SelectionStrategy::Auto;
  StagePromptSet stage_prompts = StagePromptSet::defaults();
  double temperature = 0.7;
  int max_tokens = 1024;
  std::optional<std::string> system_prompt;

  void validate() const;
};

struct InferenceQuery {
  std::string id;
  std::string question;
  std::optional<std::vector<std::string>> choices;
  std::optional<ImageRef> image;
};

struct BeamEndpoints {
  EndpointConfig target;
  /// Needed for JudgeRank and for stage-level tournaments with B > 1.
  std::optional<EndpointConfig> judge;
};

struct CandidateSet {
  std::vector<Candidate> candidates;
  std::size_t selected_index = 0;
  std::string selection_reason;
  SelectionStrategy strategy = SelectionStrategy::Auto;
  CallCounts ledger_delta;
  std::size_t failed_candidates = 0;
  Millis wall_time{0};

  const std::string& selected_text() const { return candidates.at(selected_index).text; }
};

class InferenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StrategyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Selection {
  std::size_t index = 0;
  std::string reason;
  SelectionStrategy strategy = SelectionStrategy::Auto;
};

struct SelectionContext {
  Gateway* gateway = nullptr;
  const EndpointConfig* judge = nullptr;
  std::string question;
  bool multiple_choice = false;
  CallLedger* scope = nullptr;
};

/// Ties go to the lowest candidate index for every strategy.
/// LogProb: argmax of logprob_sum / token_count.
/// JudgeRank: one judge call naming the winner.
/// MajorityAnswer: plurality over extracted final answers.
/// Auto: LogProb if every candidate has logprobs, else MajorityAnswer for
/// multiple-choice questions or without a judge, else JudgeRank.
/// Throws StrategyError (e.g. LogProb without logprobs).
Selection select_best(const std::vector<Candidate>& candidates, SelectionStrategy strategy,
                      const SelectionContext& context);

/// Text after the last "Final Answer:" line, else the last non-empty line.
std::string extract_final_answer(std::string_view response);

/// Case- and punctuation-insensitive key used for answer voting.
std::string normalize_answer(std::string_view answer);

/// First user message of an inference request: optional image, then the
/// formatted question text.
ChatMessage question_message(const InferenceQuery& query, const std::string& suffix = {});

CandidateSet beam_generate(Gateway& gateway, const BeamEndpoints& endpoints,
                           const InferenceQuery& query, const BeamConfig& config);

CandidateSet stage_level_generate(Gateway& gateway, const BeamEndpoints& endpoints,
                                  const InferenceQuery& query, const BeamConfig& config);

/// {question_id, mode, B, strategy, candidates, selected_index, ledger_delta,
/// wall_time_ms}
Json trace_json(const InferenceQuery& query, std::string_view mode, const BeamConfig& config,
                const CandidateSet& set);

}  // namespace cotbench
