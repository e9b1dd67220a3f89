#include "cotbench/assets.hpp"

namespace cotbench::assets {

namespace embedded {
extern const std::string_view reasoning_generation;
extern const std::string_view step_evaluator;
extern const std::string_view final_answer_system;
extern const std::string_view final_answer_user;
extern const std::string_view judge_rank;
extern const std::string_view stage_compare;
extern const std::string_view stage_prompts;
extern const std::string_view evaluation_scores_schema;
}  // namespace embedded

std::string_view reasoning_generation_prompt() { return embedded::reasoning_generation; }
std::string_view step_evaluator_prompt() { return embedded::step_evaluator; }
std::string_view final_answer_system_prompt() { return embedded::final_answer_system; }
std::string_view final_answer_user_template() { return embedded::final_answer_user; }
std::string_view judge_rank_template() { return embedded::judge_rank; }
std::string_view stage_compare_template() { return embedded::stage_compare; }
std::string_view stage_prompts() { return embedded::stage_prompts; }
std::string_view evaluation_scores_schema() { return embedded::evaluation_scores_schema; }

std::vector<NamedAsset> all() {
  return {
      {"prompts/reasoning_generation.txt", embedded::reasoning_generation},
      {"prompts/step_evaluator.txt", embedded::step_evaluator},
      {"prompts/final_answer_system.txt", embedded::final_answer_system},
      {"prompts/final_answer_user.txt", embedded::final_answer_user},
      {"prompts/judge_rank.txt", embedded::judge_rank},
      {"prompts/stage_compare.txt", embedded::stage_compare},
      {"prompts/stage_prompts.txt", embedded::stage_prompts},
      {"evaluation_scores.schema.json", embedded::evaluation_scores_schema},
  };
}

std::string fill(std::string_view tmpl,
                 const std::vector<std::pair<std::string_view, std::string_view>>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto key = tmpl.substr(i + 1, close - i - 1);
        bool replaced = false;
        for (const auto& [k, v] : vars) {
          if (k == key) {
            out.append(v);
            replaced = true;
            break;
          }
        }
        if (replaced) {
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  return out;
}

}  // namespace cotbench::assets
