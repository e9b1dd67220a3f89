#include "cotbench/stages.hpp"

#include <stdexcept>

#include "cotbench/assets.hpp"
#include "cotbench/core.hpp"
#include "cotbench/util.hpp"

namespace cotbench {

std::string_view to_string(Stage s) {
  static constexpr std::array<std::string_view, 4> kNames = {"summary", "caption", "reasoning",
                                                             "conclusion"};
  return kNames[static_cast<std::size_t>(s)];
}

StagePromptSet StagePromptSet::defaults() {
  const auto lines = split_lines(assets::stage_prompts());
  if (lines.size() != 4) throw std::logic_error("stage prompt asset must have four lines");
  StagePromptSet set;
  for (std::size_t i = 0; i < 4; ++i) set.prompts[i] = lines[i];
  return set;
}

void StagePromptSet::validate() const {
  for (Stage s : kAllStages) {
    if (trim(prompt(s)).empty()) {
      throw std::invalid_argument("stage prompt '" + std::string(to_string(s)) + "' is empty");
    }
  }
  static constexpr std::string_view kClosing = "Do not output anything else.";
  const auto& last = prompt(Stage::Conclusion);
  if (last.size() < kClosing.size() ||
      last.compare(last.size() - kClosing.size(), kClosing.size(), kClosing) != 0) {
    throw std::invalid_argument("conclusion prompt must end with \"Do not output anything else.\"");
  }
}

std::string format_question(const std::string& question,
                            const std::optional<std::vector<std::string>>& choices) {
  if (!choices || choices->empty()) return question;
  std::string out = question + "\nChoices:";
  for (std::size_t i = 0; i < choices->size(); ++i) {
    out += "\n";
    if (i < 26) {
      out.push_back(static_cast<char>('A' + i));
    } else {
      out += std::to_string(i + 1);
    }
    out += ". " + (*choices)[i];
  }
  return out;
}

}  // namespace cotbench
