#pragma once

// Reference-based reasoning evaluation with an LLM judge: request builders
// for the ten-attribute step judge and the binary final-answer judge, plus the
// strict parsers for their replies.

#include <stdexcept>
#include <string>
#include <string_view>

#include "cotbench/core.hpp"
#include "cotbench/gateway.hpp"

namespace cotbench {

inline constexpr int kStepJudgeMaxTokens = 500;
inline constexpr int kVerdictMaxTokens = 10;
inline constexpr std::string_view kJudgeOverallKey = "Overall Score";

struct StepEvalInput {
  std::string question;
  ReasoningChain ground_truth;
  std::string model_response;
};

struct FinalAnswerVerdict {
  int score = 0;  // 0 or 1
  std::string raw_judge_text;
};

class ScorecardParseError : public std::runtime_error {
 public:
  enum class Kind { Unparseable, MissingKey, ExtraKey, DuplicateKey, NonNumericValue, OutOfRange };

  ScorecardParseError(Kind kind, std::string key, const std::string& message)
      : std::runtime_error(message), kind_(kind), key_(std::move(key)) {}

  Kind kind() const { return kind_; }
  /// Offending key; empty for Unparseable.
  const std::string& key() const { return key_; }

 private:
  Kind kind_;
  std::string key_;
};

std::string_view to_string(ScorecardParseError::Kind k);

class VerdictError : public std::runtime_error {
 public:
  explicit VerdictError(std::string raw)
      : std::runtime_error("NonNumericVerdict: judge replied '" + raw + "'"), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

/// A failed judge call for one sample. `code` names the failure class
/// ("MissingKey", "TransportError", "NonNumericVerdict", ...).
class JudgeError : public std::runtime_error {
 public:
  JudgeError(std::string sample_id, std::string code, const std::string& detail)
      : std::runtime_error((sample_id.empty() ? std::string() : "sample " + sample_id + ": ") +
                           code + ": " + detail),
        sample_id_(std::move(sample_id)),
        code_(std::move(code)) {}

  const std::string& sample_id() const { return sample_id_; }
  const std::string& code() const { return code_; }

 private:
  std::string sample_id_;
  std::string code_;
};

/// System: the reasoning-evaluator prompt. User: question, then
/// "Ground Truth : <chain>", then "LLM Response : <response>", newline
/// separated. max_tokens 500, temperature 0, EvaluationScores schema.
/// Throws std::invalid_argument if any input field is empty.
ChatRequest build_step_eval_messages(const StepEvalInput& input);

/// Removes a surrounding ``` / ```python / ```json fence, if present.
std::string strip_code_fences(std::string_view text);

/// Strict parse of one flat object holding exactly the ten metric keys plus
/// "Overall Score". Single- or double-quoted keys are accepted (the judge is
/// asked for a Python dictionary). Throws ScorecardParseError.
JudgeScorecard parse_scorecard(std::string_view judge_text);

/// JSON object text in canonical metric order.
std::string serialize_scorecard(const JudgeScorecard& card);

/// build_step_eval_messages -> Gateway::complete(judge) -> parse_scorecard.
/// Throws JudgeError tagged with `sample_id`.
JudgeScorecard score_steps(Gateway& gateway, const EndpointConfig& endpoint,
                           const StepEvalInput& input, const std::string& sample_id = {},
                           CallLedger* scope = nullptr);

/// Final-answer comparison request: fixed helpful-assistant system prompt,
/// the comparison template as user text, max_tokens 10, temperature 0.
ChatRequest build_final_answer_request(const std::string& question,
                                       const std::string& ground_truth,
                                       const std::string& prediction);

/// Accepts exactly "0" or "1" after trimming. Throws VerdictError.
FinalAnswerVerdict parse_verdict(std::string_view judge_text);

FinalAnswerVerdict judge_final_answer(Gateway& gateway, const EndpointConfig& endpoint,
                                      const std::string& question,
                                      const std::string& ground_truth,
                                      const std::string& prediction,
                                      const std::string& sample_id = {},
                                      CallLedger* scope = nullptr);

}  // namespace cotbench
