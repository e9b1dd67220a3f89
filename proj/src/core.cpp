#include "cotbench/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace cotbench {

namespace {

struct CategoryInfo {
  Category value;
  std::string_view key;
  std::string_view label;
};

constexpr std::array<CategoryInfo, 8> kCategoryInfo = {{
    {Category::VisualReasoning, "VisualReasoning", "Visual Reasoning"},
    {Category::MathLogicReasoning, "MathLogicReasoning", "Math & Logic Reasoning"},
    {Category::SocialCulturalContext, "SocialCulturalContext", "Social & Cultural Context"},
    {Category::MedicalImaging, "MedicalImaging", "Medical Imaging"},
    {Category::ChartsDiagramUnderstanding, "ChartsDiagramUnderstanding",
     "Charts & Diagram Understanding"},
    {Category::OcrDocumentUnderstanding, "OcrDocumentUnderstanding",
     "OCR & Document Understanding"},
    {Category::ComplexVisualPerception, "ComplexVisualPerception", "Complex Visual Perception"},
    {Category::ScientificReasoning, "ScientificReasoning", "Scientific Reasoning"},
}};

constexpr std::array<std::string_view, kMetricCount> kMetricKeys = {
    "Faithfulness-Step",      "Faithfulness-Token",  "Informativeness-Step",
    "Repetition-Token",       "Hallucination",       "Redundancy",
    "Semantic Coverage-Step", "Reasoning Alignment", "Commonsense",
    "Missing Step",
};

constexpr std::array<std::string_view, 3> kImageKinds = {"FilePath", "Url", "InlineBase64"};
constexpr std::array<std::string_view, 4> kStates = {"Pending", "InReview", "Accepted",
                                                      "Rejected"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

bool is_base64(std::string_view s) {
  if (s.empty() || s.size() % 4 != 0) return false;
  std::size_t pad = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '=') {
      ++pad;
      continue;
    }
    if (pad > 0) return false;
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                    c == '+' || c == '/';
    if (!ok) return false;
  }
  return pad <= 2;
}

// Leading base64 characters of well-known image signatures.
std::optional<std::string_view> signature_prefix(std::string_view media_type) {
  if (media_type == "image/png") return "iVBORw0KGg";
  if (media_type == "image/jpeg" || media_type == "image/jpg") return "/9j/";
  if (media_type == "image/gif") return "R0lGOD";
  if (media_type == "image/webp") return "UklGR";
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Category c) { return kCategoryInfo[static_cast<std::size_t>(c)].key; }

std::string_view display_name(Category c) {
  return kCategoryInfo[static_cast<std::size_t>(c)].label;
}

std::optional<Category> parse_category(std::string_view s) {
  for (const auto& info : kCategoryInfo) {
    if (info.key == s) return info.value;
  }
  return std::nullopt;
}

std::string_view to_string(MetricName m) { return kMetricKeys[static_cast<std::size_t>(m)]; }

std::optional<MetricName> parse_metric(std::string_view s) {
  return lookup<MetricName>(kMetricKeys, s);
}

std::string_view to_string(ImageKind k) { return kImageKinds[static_cast<std::size_t>(k)]; }

std::optional<ImageKind> parse_image_kind(std::string_view s) {
  return lookup<ImageKind>(kImageKinds, s);
}

std::string_view to_string(VerificationState s) { return kStates[static_cast<std::size_t>(s)]; }

std::optional<VerificationState> parse_verification_state(std::string_view s) {
  return lookup<VerificationState>(kStates, s);
}

std::string trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

ReasoningChain ReasoningChain::from_texts(const std::vector<std::string>& texts,
                                          std::string final_answer) {
  ReasoningChain chain;
  chain.final_answer = std::move(final_answer);
  chain.steps.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    chain.steps.push_back({static_cast<int>(i + 1), texts[i]});
  }
  return chain;
}

std::vector<std::string> ReasoningChain::step_texts() const {
  std::vector<std::string> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.text);
  return out;
}

std::string ReasoningChain::render() const {
  std::string out;
  for (const auto& s : steps) {
    out += "Step " + std::to_string(s.index) + ": " + s.text + "\n";
  }
  out += "Final Answer: " + final_answer;
  return out;
}

bool ValidationResult::has(std::string_view code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

std::string ValidationResult::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.code + ": " + v.detail;
  }
  return out;
}

std::vector<Violation> validate_image(const ImageRef& image) {
  std::vector<Violation> out;
  if (trim(image.value).empty()) {
    out.push_back({"image-value", "image value is empty"});
  }
  if (image.kind == ImageKind::InlineBase64) {
    if (image.media_type.rfind("image/", 0) != 0) {
      out.push_back({"image-media-type",
                     "inline image needs an image/* media type, got '" + image.media_type + "'"});
    } else if (!image.value.empty()) {
      if (!is_base64(image.value)) {
        out.push_back({"image-media-type", "inline image payload is not valid base64"});
      } else if (auto prefix = signature_prefix(image.media_type);
                 prefix && image.value.rfind(*prefix, 0) != 0) {
        out.push_back({"image-media-type",
                       "inline payload does not look like " + image.media_type});
      }
    }
  }
  return out;
}

ValidationResult validate_sample(const BenchmarkSample& sample) {
  ValidationResult result;
  auto& v = result.violations;

  if (trim(sample.id).empty()) v.push_back({"id", "sample id is empty"});

  for (auto& img : validate_image(sample.image)) v.push_back(std::move(img));

  const auto& steps = sample.ground_truth.steps;
  if (steps.empty()) {
    v.push_back({"chain-empty", "ground truth has no reasoning steps"});
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].index != static_cast<int>(i + 1)) {
      v.push_back({"step-index", "step at position " + std::to_string(i + 1) + " has index " +
                                     std::to_string(steps[i].index)});
    }
    if (trim(steps[i].text).empty() || trim(steps[i].text) != steps[i].text) {
      v.push_back({"step-text",
                   "step " + std::to_string(i + 1) + " text is empty or not trimmed"});
    }
  }
  if (trim(sample.ground_truth.final_answer).empty()) {
    v.push_back({"final-answer", "final answer is empty"});
  }
  if (!sample.min_step_exempt && steps.size() < kMinReasoningSteps) {
    v.push_back({"min-steps", "ground truth has " + std::to_string(steps.size()) +
                                  " steps; at least " + std::to_string(kMinReasoningSteps) +
                                  " required"});
  }
  return result;
}

bool score_in_range(double v) { return std::isfinite(v) && v >= kMinScore && v <= kMaxScore; }

double recompute_overall(const std::map<MetricName, double>& scores) {
  double sum = 0.0;
  for (MetricName m : kAllMetrics) {
    const auto it = scores.find(m);
    if (it == scores.end()) {
      throw ScoreError(ScoreError::Kind::MissingMetric, std::string(to_string(m)),
                       "missing metric '" + std::string(to_string(m)) + "'");
    }
    if (!score_in_range(it->second)) {
      throw ScoreError(ScoreError::Kind::OutOfRange, std::string(to_string(m)),
                       "metric '" + std::string(to_string(m)) + "' score " +
                           std::to_string(it->second) + " outside [1,10]");
    }
    sum += it->second;
  }
  return sum / static_cast<double>(kMetricCount);
}

JudgeScorecard JudgeScorecard::make(const std::map<MetricName, double>& scores,
                                    std::optional<double> judge_reported_overall) {
  JudgeScorecard card;
  card.overall_ = recompute_overall(scores);
  for (MetricName m : kAllMetrics) {
    card.scores_[static_cast<std::size_t>(m)] = scores.at(m);
  }
  card.judge_reported_overall_ = judge_reported_overall;
  return card;
}

}  // namespace cotbench
