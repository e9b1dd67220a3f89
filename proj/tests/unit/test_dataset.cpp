#include <gtest/gtest.h>

#include "cotbench/dataset.hpp"
#include "fixtures.hpp"

namespace cotbench {
namespace {

using fixtures::make_sample;
using fixtures::TempDir;

std::string line_of(const BenchmarkSample& s) { return to_json(s).dump() + "\n"; }

TEST(Dataset, ParsesAndRoundTrips) {
  Dataset d;
  d.samples = {make_sample("a", 3), make_sample("b", 4, Category::MedicalImaging)};
  const auto text = serialize_dataset(d);
  const auto back = parse_dataset(text, "bench");
  ASSERT_EQ(back.samples.size(), 2u);
  EXPECT_EQ(back.samples[1], d.samples[1]);
  EXPECT_EQ(serialize_dataset(back), text);
}

TEST(Dataset, ErrorsCarryLineNumbers) {
  const auto good = line_of(make_sample("a", 3));
  try {
    parse_dataset(good + "\n" + "{not json\n");
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.kind(), DatasetError::Kind::Parse);
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(std::string(e.what()).rfind("line 3:", 0), 0u);
  }
}

TEST(Dataset, DuplicateIdsRejected) {
  const auto a = line_of(make_sample("a", 3));
  try {
    parse_dataset(a + a);
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.kind(), DatasetError::Kind::DuplicateId);
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Dataset, InvalidSampleRejectedWithViolation) {
  try {
    parse_dataset(line_of(make_sample("short", 2)));
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.kind(), DatasetError::Kind::Invalid);
    EXPECT_NE(std::string(e.what()).find("min-steps"), std::string::npos);
  }
}

TEST(Dataset, LoadNamesAndVersionsByContent) {
  TempDir dir;
  Dataset d;
  d.samples = {make_sample("a", 3)};
  save_dataset(dir / "mini.jsonl", d);
  const auto loaded = load_dataset(dir / "mini.jsonl");
  EXPECT_EQ(loaded.name, "mini");
  EXPECT_EQ(loaded.version, sha256_hex(read_file(dir / "mini.jsonl")).substr(0, 12));
  append_sample(dir / "mini.jsonl", make_sample("b", 3));
  EXPECT_EQ(load_dataset(dir / "mini.jsonl").samples.size(), 2u);
  EXPECT_THROW(append_sample(dir / "mini.jsonl", make_sample("c", 1)), DatasetError);
  EXPECT_THROW(load_dataset(dir / "missing.jsonl"), DatasetError);
}

TEST(Dataset, SecondWriterIsLockedOut) {
  TempDir dir;
  FileLock held(dir / "mini.jsonl");
  Dataset d;
  d.samples = {make_sample("a", 3)};
  EXPECT_THROW(save_dataset(dir / "mini.jsonl", d), LockError);
}

TEST(MinSteps, KeepsLongAndExemptIdempotently) {
  Dataset d;
  d.samples = {make_sample("three", 3), make_sample("two-exempt", 2, Category::VisualReasoning, true),
               make_sample("two", 2)};
  const auto once = filter_min_steps(d);
  ASSERT_EQ(once.kept.samples.size(), 2u);
  EXPECT_EQ(once.kept.samples[0].id, "three");
  EXPECT_EQ(once.kept.samples[1].id, "two-exempt");
  EXPECT_EQ(once.dropped, std::vector<std::string>{"two"});
  const auto twice = filter_min_steps(once.kept);
  EXPECT_EQ(twice.kept.samples, once.kept.samples);
  EXPECT_TRUE(twice.dropped.empty());
}

TEST(Sft, MiddleIncomeConversation) {
  const auto sample = fixtures::middle_income_sample();
  bool synthesized = true;
  const auto conv = build_sft_conversation(sample, StagePromptSet::defaults(), &synthesized);
  EXPECT_FALSE(synthesized);
  ASSERT_EQ(conv.turns.size(), 8u);
  EXPECT_EQ(conv.turns[0].text,
            "What was the value of the middle-income share in 1971? Answer the question using a "
            "single word or phrase. Please generate a summary of the picture.");
  EXPECT_TRUE(conv.turns[0].image.has_value());
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(conv.turns[i].role, i % 2 == 0 ? Role::Human : Role::Assistant);
  }
  EXPECT_EQ(conv.turns[2].text, "Please generate a detailed caption for the image.");
  EXPECT_EQ(conv.turns[7].text, "0.61");
}

TEST(Sft, MissingStagesFallBackToGroundTruth) {
  auto s = make_sample("a", 3);
  bool synthesized = false;
  const auto conv = build_sft_conversation(s, StagePromptSet::defaults(), &synthesized);
  EXPECT_TRUE(synthesized);
  EXPECT_EQ(conv.turns[1].text, s.ground_truth.steps[0].text);
  EXPECT_EQ(conv.turns[3].text, s.ground_truth.steps[1].text);
  EXPECT_EQ(conv.turns[5].text, s.ground_truth.steps[0].text + " " + s.ground_truth.steps[1].text +
                                    " " + s.ground_truth.steps[2].text);
}

TEST(Sft, ExportRefusesUnacceptedBeforeEmitting) {
  Dataset d;
  d.samples = {make_sample("a", 3), make_sample("b", 3)};
  d.samples[1].verification_state = VerificationState::InReview;
  std::size_t emitted = 0;
  try {
    export_sft(d, StagePromptSet::defaults(), [&](const SftConversation&) { ++emitted; });
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.kind(), DatasetError::Kind::NotAccepted);
  }
  EXPECT_EQ(emitted, 0u);
}

TEST(Sft, ConversationJsonShape) {
  const auto j = to_json(build_sft_conversation(fixtures::middle_income_sample(),
                                                StagePromptSet::defaults()));
  EXPECT_EQ(j["turns"].size(), 8u);
  EXPECT_EQ(j["turns"][0]["role"], "human");
  EXPECT_TRUE(j["turns"][0].contains("image"));
  EXPECT_FALSE(j["turns"][1].contains("image"));
}

}  // namespace
}  // namespace cotbench
