#pragma once

// Prompt texts and the structured-output schema, embedded into the binary at
// build time from assets/. The bytes are exactly the checked-in files.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cotbench::assets {

/// System prompt for step-by-step chain generation (Step n / Action n /
/// Final Answer layout).
std::string_view reasoning_generation_prompt();
/// System prompt for the ten-attribute reasoning judge.
std::string_view step_evaluator_prompt();
std::string_view final_answer_system_prompt();
/// User-message template with {question}, {ground_truth}, {llm_response}.
std::string_view final_answer_user_template();
/// Best-of-B ranking prompt; {question}, {candidates}.
std::string_view judge_rank_template();
/// Pairwise stage comparison; {stage}, {question}, {first}, {second}.
std::string_view stage_compare_template();
/// Four lines: summary, caption, reasoning and final-answer stage prompts.
std::string_view stage_prompts();
/// The EvaluationScores response_format object.
std::string_view evaluation_scores_schema();

struct NamedAsset {
  std::string name;
  std::string_view bytes;
};

std::vector<NamedAsset> all();

/// Substitutes every "{key}" occurrence. Unknown placeholders are left alone.
std::string fill(std::string_view tmpl,
                 const std::vector<std::pair<std::string_view, std::string_view>>& vars);

}  // namespace cotbench::assets
