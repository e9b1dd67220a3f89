#include <gtest/gtest.h>

#include "cotbench/assets.hpp"
#include "cotbench/judge.hpp"
#include "fixtures.hpp"

namespace cotbench {
namespace {

using fixtures::mock_endpoint;
using Kind = ScorecardParseError::Kind;

// Example judge output line from the evaluator prompt.
constexpr const char* kExampleOutput =
    "{'Faithfulness-Step': 8.0, 'Faithfulness-Token': 7.5, 'Informativeness-Step': 8.5, "
    "'Repetition-Token': 9.0, 'Hallucination': 9.5, 'Redundancy': 8.0, "
    "'Semantic Coverage-Step': 8.5, 'Reasoning Alignment': 8.0, 'Commonsense': 9.0, "
    "'Missing Step': 8.5 , 'Overall Score': 8.65}";

Kind parse_kind(const std::string& text) {
  try {
    parse_scorecard(text);
  } catch (const ScorecardParseError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "parsed: " << text;
  return Kind::Unparseable;
}

TEST(Scorecard, ExampleOutput) {
  const auto card = parse_scorecard(kExampleOutput);
  EXPECT_DOUBLE_EQ(card.score(MetricName::FaithfulnessStep), 8.0);
  EXPECT_DOUBLE_EQ(card.score(MetricName::FaithfulnessToken), 7.5);
  EXPECT_DOUBLE_EQ(card.score(MetricName::Hallucination), 9.5);
  EXPECT_DOUBLE_EQ(card.score(MetricName::MissingStep), 8.5);
  EXPECT_EQ(card.judge_reported_overall(), 8.65);
  EXPECT_NEAR(card.overall(), 8.45, 1e-9);
}

TEST(Scorecard, FencedAndMultilineForms) {
  const auto plain = parse_scorecard(kExampleOutput);
  EXPECT_EQ(parse_scorecard(std::string("```python\n") + kExampleOutput + "\n```"), plain);
  EXPECT_EQ(parse_scorecard(std::string("```\n") + kExampleOutput + "\n```\n"), plain);
  const auto low = parse_scorecard(
      "```python\n{\n  'Faithfulness-Step': 1.0,\n  'Faithfulness-Token': 1.0,\n"
      "  'Informativeness-Step': 1.0,\n  'Repetition-Token': 9.0,\n  'Hallucination': 1.0,\n"
      "  'Redundancy': 9.0,\n  'Semantic Coverage-Step': 1.0,\n  'Reasoning Alignment': 1.0,\n"
      "  'Commonsense': 1.0,\n  'Missing Step': 1.0,\n  'Overall Score': 2.6\n}\n```");
  EXPECT_NEAR(low.overall(), 2.6, 1e-9);
}

TEST(Scorecard, JsonQuotingAndTrailingComma) {
  auto text = fixtures::uniform_scorecard(7.0);
  for (auto& c : text) {
    if (c == '\'') c = '"';
  }
  EXPECT_NEAR(parse_scorecard(text).overall(), 7.0, 1e-12);
  text.insert(text.size() - 1, ",");
  EXPECT_NEAR(parse_scorecard(text).overall(), 7.0, 1e-12);
}

TEST(Scorecard, DistinctErrorKinds) {
  const std::string base = fixtures::uniform_scorecard(5.0);
  EXPECT_EQ(parse_kind(""), Kind::Unparseable);
  EXPECT_EQ(parse_kind("The response is good."), Kind::Unparseable);
  EXPECT_EQ(parse_kind(base + " trailing words"), Kind::Unparseable);

  std::string missing = base;
  missing.replace(missing.find("'Commonsense': 5, "), std::string("'Commonsense': 5, ").size(), "");
  EXPECT_EQ(parse_kind(missing), Kind::MissingKey);

  std::string no_overall = base.substr(0, base.find(", 'Overall Score'")) + "}";
  EXPECT_EQ(parse_kind(no_overall), Kind::MissingKey);

  EXPECT_EQ(parse_kind("{'Clarity': 5, " + base.substr(1)), Kind::ExtraKey);
  EXPECT_EQ(parse_kind("{'Redundancy': 5, " + base.substr(1)), Kind::DuplicateKey);

  std::string text_value = base;
  text_value.replace(text_value.find("'Redundancy': 5"), 15, "'Redundancy': 'high'");
  EXPECT_EQ(parse_kind(text_value), Kind::NonNumericValue);

  std::string high = base;
  high.replace(high.find("'Redundancy': 5"), 15, "'Redundancy': 10.5");
  EXPECT_EQ(parse_kind(high), Kind::OutOfRange);
  std::string zero = base;
  zero.replace(zero.find("'Redundancy': 5"), 15, "'Redundancy': 0");
  EXPECT_EQ(parse_kind(zero), Kind::OutOfRange);
}

TEST(Scorecard, ErrorNamesTheKey) {
  std::string text = fixtures::uniform_scorecard(5.0);
  text.replace(text.find("'Hallucination': 5"), 18, "'Hallucination': 12");
  try {
    parse_scorecard(text);
    FAIL();
  } catch (const ScorecardParseError& e) {
    EXPECT_EQ(e.key(), "Hallucination");
  }
}

TEST(Scorecard, SerializeRoundTrips) {
  const auto card = parse_scorecard(kExampleOutput);
  EXPECT_EQ(parse_scorecard(serialize_scorecard(card)), card);
}

TEST(StepEval, RequestShape) {
  StepEvalInput in{"How many bars?", ReasoningChain::from_texts({"a", "b", "c"}, "3"), "It is 3."};
  const auto req = build_step_eval_messages(in);
  EXPECT_EQ(req.system, std::string(assets::step_evaluator_prompt()));
  EXPECT_EQ(req.temperature, 0.0);
  EXPECT_EQ(req.max_tokens, 500);
  ASSERT_TRUE(req.response_schema.has_value());
  ASSERT_EQ(req.messages.size(), 1u);
  EXPECT_EQ(req.messages[0].parts[0].text,
            "How many bars?\nGround Truth : Step 1: a\nStep 2: b\nStep 3: c\nFinal Answer: 3\n"
            "LLM Response : It is 3.");
}

TEST(StepEval, EmptyInputsRejected) {
  const auto chain = ReasoningChain::from_texts({"a"}, "1");
  EXPECT_THROW(build_step_eval_messages({"", chain, "r"}), std::invalid_argument);
  EXPECT_THROW(build_step_eval_messages({"q", {}, "r"}), std::invalid_argument);
  EXPECT_THROW(build_step_eval_messages({"q", chain, "  "}), std::invalid_argument);
}

TEST(FinalAnswer, RequestShape) {
  const auto req = build_final_answer_request("Q", "0.61", "61%");
  EXPECT_EQ(req.max_tokens, 10);
  EXPECT_EQ(req.temperature, 0.0);
  EXPECT_EQ(req.system, std::string(assets::final_answer_system_prompt()));
  const auto& text = req.messages[0].parts[0].text;
  EXPECT_NE(text.find("Question: Q"), std::string::npos);
  EXPECT_NE(text.find("Ground Truth: 0.61"), std::string::npos);
  EXPECT_EQ(text.find("{llm_response}"), std::string::npos);
}

TEST(FinalAnswer, VerdictIsStrictlyBinary) {
  EXPECT_EQ(parse_verdict(" 1\n").score, 1);
  EXPECT_EQ(parse_verdict("0").score, 0);
  EXPECT_THROW(parse_verdict("yes"), VerdictError);
  EXPECT_THROW(parse_verdict("1."), VerdictError);
  EXPECT_THROW(parse_verdict("2"), VerdictError);
}

TEST(JudgeCalls, ScoreStepsThroughGateway) {
  Gateway g(std::make_shared<VirtualClock>());
  auto mock = std::make_shared<MockBackend>();
  const auto ep = mock_endpoint("judge");
  g.register_backend(ep.base_url, mock);
  mock->script(RouteMatcher::any(), {reply_text(kExampleOutput), reply_text("{'Redundancy': 3}"),
                                     reply_text("1"), reply_text("maybe")});
  StepEvalInput in{"q", ReasoningChain::from_texts({"a", "b", "c"}, "x"), "resp"};
  CallLedger scope;
  EXPECT_NEAR(score_steps(g, ep, in, "s1", &scope).overall(), 8.45, 1e-9);
  try {
    score_steps(g, ep, in, "s2");
    FAIL();
  } catch (const JudgeError& e) {
    EXPECT_EQ(e.code(), "MissingKey");
    EXPECT_EQ(e.sample_id(), "s2");
  }
  EXPECT_EQ(judge_final_answer(g, ep, "q", "x", "resp", "s1", &scope).score, 1);
  try {
    judge_final_answer(g, ep, "q", "x", "resp", "s3");
    FAIL();
  } catch (const JudgeError& e) {
    EXPECT_EQ(e.code(), "NonNumericVerdict");
  }
  EXPECT_EQ(scope.counts().judge_calls, 2u);
  EXPECT_EQ(g.ledger().counts().judge_calls, 4u);
  EXPECT_EQ(g.ledger().counts().generation_calls, 0u);
}

TEST(JudgeCalls, TransportFailureIsTagged) {
  Gateway g(std::make_shared<VirtualClock>());
  auto mock = std::make_shared<MockBackend>();
  auto ep = mock_endpoint("judge");
  ep.max_retries = 1;
  g.register_backend(ep.base_url, mock);
  mock->script(RouteMatcher::any(), {fail_transient(), fail_transient()});
  try {
    judge_final_answer(g, ep, "q", "x", "resp", "s1");
    FAIL();
  } catch (const JudgeError& e) {
    EXPECT_EQ(e.code(), "TransportError");
  }
}

}  // namespace
}  // namespace cotbench
