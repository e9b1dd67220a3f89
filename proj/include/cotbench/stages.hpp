#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cotbench {

/// The four answer stages, in order.
enum class Stage { Summary, Caption, Reasoning, Conclusion };

inline constexpr std::array<Stage, 4> kAllStages = {Stage::Summary, Stage::Caption,
                                                    Stage::Reasoning, Stage::Conclusion};

std::string_view to_string(Stage s);

/// Fixed human prompts for each stage, e.g. "Please generate a summary of the
/// picture." The conclusion prompt must end with "Do not output anything else."
struct StagePromptSet {
  std::array<std::string, 4> prompts;

  const std::string& prompt(Stage s) const { return prompts[static_cast<std::size_t>(s)]; }

  /// The built-in multi-turn prompts shipped with the toolkit.
  static StagePromptSet defaults();
  /// Throws std::invalid_argument on empty prompts or a conclusion prompt
  /// without the closing instruction.
  void validate() const;
};

/// Question text with an optional lettered choice list appended.
std::string format_question(const std::string& question,
                            const std::optional<std::vector<std::string>>& choices);

}  // namespace cotbench
