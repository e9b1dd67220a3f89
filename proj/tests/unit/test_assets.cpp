#include <gtest/gtest.h>

#include "cotbench/assets.hpp"
#include "cotbench/json_codec.hpp"
#include "cotbench/stages.hpp"
#include "cotbench/util.hpp"

namespace cotbench {
namespace {

// Hashes of the checked-in asset files, computed with sha256sum.
TEST(Assets, GoldenHashes) {
  EXPECT_EQ(sha256_hex(assets::reasoning_generation_prompt()),
            "92656e1d555b0359002b0578873684e39856507ad5c5f186119e790bcd96a5da");
  EXPECT_EQ(sha256_hex(assets::step_evaluator_prompt()),
            "07afb80719ff5c2532c3e6e5f4917728be4aae0dfff26e8bf4d28d95a83b0837");
  EXPECT_EQ(sha256_hex(assets::final_answer_system_prompt()),
            "bf078ad71a4c1ecbe0e795dc5edbdcd45b35452544e43972d6f71c80803690bd");
  EXPECT_EQ(sha256_hex(assets::final_answer_user_template()),
            "af3eec67dfbeb602d0533003a123a9a6f78a6ef5cd4637d6cd6d8b7598628509");
  EXPECT_EQ(sha256_hex(assets::judge_rank_template()),
            "55b39f99178ace9b5f0c6582c2cebde2eabe71adec12e39dc1df4bffa8118151");
  EXPECT_EQ(sha256_hex(assets::stage_compare_template()),
            "6f2ae4ef0223b56d5dd12d6c522db10634643959d9241fe9df20cc38502975df");
  EXPECT_EQ(sha256_hex(assets::stage_prompts()),
            "ef516c31261756a1f62a0be58ea3abb11f1b70a3ea0b50cdd15dc95c6003563f");
}

TEST(Assets, AllListsEveryAssetOnce) {
  const auto all = assets::all();
  EXPECT_EQ(all.size(), 8u);
  for (const auto& a : all) EXPECT_FALSE(a.bytes.empty()) << a.name;
}

TEST(Assets, SchemaIsJsonWithAllTenMetrics) {
  const auto schema = Json::parse(assets::evaluation_scores_schema());
  const auto& props = schema["json_schema"]["schema"]["properties"];
  EXPECT_EQ(props.size(), 11u);
  EXPECT_TRUE(props.contains("Semantic Coverage-Step"));
  EXPECT_TRUE(props.contains("Overall Score"));
}

TEST(Assets, FillReplacesKnownPlaceholdersOnly) {
  EXPECT_EQ(assets::fill("{a} and {b} and {a} {c}", {{"a", "x"}, {"b", "{a}"}}),
            "x and {a} and x {c}");
}

TEST(Assets, FinalAnswerTemplateHasThreePlaceholders) {
  const auto t = assets::final_answer_user_template();
  for (const char* p : {"{question}", "{ground_truth}", "{llm_response}"}) {
    EXPECT_NE(t.find(p), std::string_view::npos) << p;
  }
}

TEST(Stages, DefaultPromptsValidate) {
  const auto p = StagePromptSet::defaults();
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.prompt(Stage::Summary), "Please generate a summary of the picture.");
  EXPECT_EQ(p.prompt(Stage::Conclusion),
            "Please generate the final answer based on reasoning steps. Do not output anything else.");
}

TEST(Stages, ConclusionMustCloseTheOutput) {
  auto p = StagePromptSet::defaults();
  p.prompts[3] = "Answer.";
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = StagePromptSet::defaults();
  p.prompts[1] = "";
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Stages, FormatQuestionLettersChoices) {
  EXPECT_EQ(format_question("Q?", std::nullopt), "Q?");
  EXPECT_EQ(format_question("Q?", std::vector<std::string>{"red", "blue"}),
            "Q?\nChoices:\nA. red\nB. blue");
}

}  // namespace
}  // namespace cotbench
