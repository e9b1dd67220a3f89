#include "cotbench/judge.hpp"

#include <cctype>
#include <charconv>
#include <map>
#include <set>

#include "cotbench/assets.hpp"
#include "cotbench/mock_backend.hpp"

namespace cotbench {

std::string_view to_string(ScorecardParseError::Kind k) {
  switch (k) {
    case ScorecardParseError::Kind::Unparseable: return "Unparseable";
    case ScorecardParseError::Kind::MissingKey: return "MissingKey";
    case ScorecardParseError::Kind::ExtraKey: return "ExtraKey";
    case ScorecardParseError::Kind::DuplicateKey: return "DuplicateKey";
    case ScorecardParseError::Kind::NonNumericValue: return "NonNumericValue";
    case ScorecardParseError::Kind::OutOfRange: return "OutOfRange";
  }
  return "Unknown";
}

ChatRequest build_step_eval_messages(const StepEvalInput& input) {
  if (trim(input.question).empty()) throw std::invalid_argument("step eval: question is empty");
  if (input.ground_truth.steps.empty() && trim(input.ground_truth.final_answer).empty()) {
    throw std::invalid_argument("step eval: ground truth is empty");
  }
  if (trim(input.model_response).empty()) {
    throw std::invalid_argument("step eval: model response is empty");
  }
  ChatRequest req;
  req.system = std::string(assets::step_evaluator_prompt());
  req.messages.push_back(ChatMessage::user_text(input.question + "\n" + "Ground Truth : " +
                                                input.ground_truth.render() + "\n" +
                                                "LLM Response : " + input.model_response));
  req.max_tokens = kStepJudgeMaxTokens;
  req.temperature = 0.0;
  req.response_schema = std::string(assets::evaluation_scores_schema());
  return req;
}

std::string strip_code_fences(std::string_view text) {
  std::string s = trim(text);
  if (s.rfind("```", 0) == 0) {
    const auto nl = s.find('\n');
    s = nl == std::string::npos ? s.substr(3) : s.substr(nl + 1);
    s = trim(s);
    if (s.size() >= 3 && s.compare(s.size() - 3, 3, "```") == 0) s.resize(s.size() - 3);
    s = trim(s);
  }
  return s;
}

namespace {

using Kind = ScorecardParseError::Kind;

// Recursive-descent reader for a single flat {key: number, ...} object.
class FlatObjectReader {
 public:
  explicit FlatObjectReader(std::string_view text) : s_(text) {}

  std::vector<std::pair<std::string, double>> read() {
    std::vector<std::pair<std::string, double>> out;
    skip_ws();
    expect('{');
    skip_ws();
    if (peek() == '}') {
      ++pos_;
    } else {
      for (;;) {
        skip_ws();
        if (peek() == '}') {  // trailing comma, as Python allows
          ++pos_;
          break;
        }
        std::string key = read_string();
        skip_ws();
        expect(':');
        skip_ws();
        const double value = read_number(key);
        out.emplace_back(std::move(key), value);
        skip_ws();
        const char c = next();
        if (c == '}') break;
        if (c != ',') fail("expected ',' or '}'");
      }
    }
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected text after the object");
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ScorecardParseError(Kind::Unparseable, {},
                              "Unparseable: " + what + " at offset " + std::to_string(pos_));
  }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  char next() {
    if (pos_ >= s_.size()) fail("unexpected end of text");
    return s_[pos_++];
  }

  void expect(char c) {
    if (next() != c) fail(std::string("expected '") + c + "'");
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  std::string read_string() {
    const char quote = next();
    if (quote != '"' && quote != '\'') fail("expected a quoted key");
    std::string out;
    for (;;) {
      char c = next();
      if (c == quote) return out;
      if (c == '\\') {
        c = next();
        switch (c) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case 'r': out.push_back('\r'); break;
          default: out.push_back(c); break;
        }
        continue;
      }
      out.push_back(c);
    }
  }

  void skip_value() {
    // Consume a non-numeric value so the error can name its key.
    const char c = peek();
    if (c == '"' || c == '\'') {
      read_string();
      return;
    }
    int depth = 0;
    while (pos_ < s_.size()) {
      const char d = s_[pos_];
      if (d == '{' || d == '[') ++depth;
      if (d == '}' || d == ']') {
        if (depth == 0) return;
        --depth;
      }
      if (d == ',' && depth == 0) return;
      ++pos_;
    }
  }

  double read_number(const std::string& key) {
    const char c = peek();
    const bool numeric_start = (c >= '0' && c <= '9') || c == '-' || c == '+' || c == '.';
    if (!numeric_start) {
      skip_value();
      throw ScorecardParseError(Kind::NonNumericValue, key,
                                "NonNumericValue: '" + key + "' is not a number");
    }
    std::size_t start = pos_;
    if (c == '+') ++start;
    std::size_t end = start;
    while (end < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[end])) ||
                               s_[end] == '.' || s_[end] == 'e' || s_[end] == 'E' ||
                               s_[end] == '-' || s_[end] == '+')) {
      ++end;
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s_.data() + start, s_.data() + end, value);
    if (ec != std::errc() || ptr != s_.data() + end) {
      pos_ = end;
      throw ScorecardParseError(Kind::NonNumericValue, key,
                                "NonNumericValue: '" + key + "' is not a number");
    }
    pos_ = end;
    return value;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

JudgeScorecard parse_scorecard(std::string_view judge_text) {
  const std::string body = strip_code_fences(judge_text);
  if (body.empty()) throw ScorecardParseError(Kind::Unparseable, {}, "Unparseable: empty reply");
  const auto entries = FlatObjectReader(body).read();

  std::map<MetricName, double> scores;
  std::optional<double> overall;
  std::set<std::string> seen;
  for (const auto& [key, value] : entries) {
    if (!seen.insert(key).second) {
      throw ScorecardParseError(Kind::DuplicateKey, key, "DuplicateKey: '" + key + "'");
    }
    const auto metric = parse_metric(key);
    if (!metric && key != kJudgeOverallKey) {
      throw ScorecardParseError(Kind::ExtraKey, key, "ExtraKey: '" + key + "'");
    }
    if (!score_in_range(value)) {
      throw ScorecardParseError(Kind::OutOfRange, key,
                                "OutOfRange: '" + key + "' = " + std::to_string(value));
    }
    if (metric) {
      scores[*metric] = value;
    } else {
      overall = value;
    }
  }
  for (MetricName m : kAllMetrics) {
    if (!scores.count(m)) {
      const std::string key(to_string(m));
      throw ScorecardParseError(Kind::MissingKey, key, "MissingKey: '" + key + "'");
    }
  }
  if (!overall) {
    throw ScorecardParseError(Kind::MissingKey, std::string(kJudgeOverallKey),
                              "MissingKey: 'Overall Score'");
  }
  return JudgeScorecard::make(scores, overall);
}

std::string serialize_scorecard(const JudgeScorecard& card) { return to_json(card).dump(); }

namespace {

std::string error_code(const std::exception& e) {
  if (dynamic_cast<const TransportError*>(&e)) return "TransportError";
  if (dynamic_cast<const ProtocolError*>(&e)) return "ProtocolError";
  if (dynamic_cast<const MockScriptError*>(&e)) return "MockScriptError";
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const TransientError*>(&e)) return "TransientError";
  return "GatewayError";
}

std::string call_judge(Gateway& gateway, const EndpointConfig& endpoint, const ChatRequest& req,
                       const std::string& sample_id, CallLedger* scope) {
  try {
    return gateway.complete(endpoint, req, Purpose::Judge, scope).text();
  } catch (const GatewayError& e) {
    throw JudgeError(sample_id, error_code(e), e.what());
  }
}

}  // namespace

JudgeScorecard score_steps(Gateway& gateway, const EndpointConfig& endpoint,
                           const StepEvalInput& input, const std::string& sample_id,
                           CallLedger* scope) {
  const auto request = build_step_eval_messages(input);
  const auto reply = call_judge(gateway, endpoint, request, sample_id, scope);
  try {
    return parse_scorecard(reply);
  } catch (const ScorecardParseError& e) {
    throw JudgeError(sample_id, std::string(to_string(e.kind())), e.what());
  }
}

ChatRequest build_final_answer_request(const std::string& question,
                                       const std::string& ground_truth,
                                       const std::string& prediction) {
  ChatRequest req;
  req.system = std::string(assets::final_answer_system_prompt());
  req.messages.push_back(ChatMessage::user_text(
      assets::fill(assets::final_answer_user_template(), {{"question", question},
                                                          {"ground_truth", ground_truth},
                                                          {"llm_response", prediction}})));
  req.max_tokens = kVerdictMaxTokens;
  req.temperature = 0.0;
  return req;
}

FinalAnswerVerdict parse_verdict(std::string_view judge_text) {
  const auto t = trim(judge_text);
  if (t == "1") return {1, std::string(judge_text)};
  if (t == "0") return {0, std::string(judge_text)};
  throw VerdictError(std::string(judge_text));
}

FinalAnswerVerdict judge_final_answer(Gateway& gateway, const EndpointConfig& endpoint,
                                      const std::string& question,
                                      const std::string& ground_truth,
                                      const std::string& prediction,
                                      const std::string& sample_id, CallLedger* scope) {
  const auto request = build_final_answer_request(question, ground_truth, prediction);
  const auto reply = call_judge(gateway, endpoint, request, sample_id, scope);
  try {
    return parse_verdict(reply);
  } catch (const VerdictError& e) {
    throw JudgeError(sample_id, "NonNumericVerdict", e.what());
  }
}

}  // namespace cotbench
