#pragma once

// Domain types shared by every cotbench module: benchmark samples, reasoning
// chains, the ten-attribute judge scorecard and their validation rules.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cotbench {

enum class Category {
  VisualReasoning,
  MathLogicReasoning,
  SocialCulturalContext,
  MedicalImaging,
  ChartsDiagramUnderstanding,
  OcrDocumentUnderstanding,
  ComplexVisualPerception,
  ScientificReasoning,
};

inline constexpr std::array<Category, 8> kAllCategories = {
    Category::VisualReasoning,          Category::MathLogicReasoning,
    Category::SocialCulturalContext,    Category::MedicalImaging,
    Category::ChartsDiagramUnderstanding, Category::OcrDocumentUnderstanding,
    Category::ComplexVisualPerception,  Category::ScientificReasoning,
};

std::string_view to_string(Category c);
/// Human-readable label used in rendered reports ("Math & Logic Reasoning").
std::string_view display_name(Category c);
std::optional<Category> parse_category(std::string_view s);

/// The ten judge attributes. Declaration order is the canonical serialization
/// order everywhere (prompts, JSON, report columns).
enum class MetricName {
  FaithfulnessStep,
  FaithfulnessToken,
  InformativenessStep,
  RepetitionToken,
  Hallucination,
  Redundancy,
  SemanticCoverageStep,
  ReasoningAlignment,
  Commonsense,
  MissingStep,
};

inline constexpr std::size_t kMetricCount = 10;

inline constexpr std::array<MetricName, kMetricCount> kAllMetrics = {
    MetricName::FaithfulnessStep,     MetricName::FaithfulnessToken,
    MetricName::InformativenessStep,  MetricName::RepetitionToken,
    MetricName::Hallucination,        MetricName::Redundancy,
    MetricName::SemanticCoverageStep, MetricName::ReasoningAlignment,
    MetricName::Commonsense,          MetricName::MissingStep,
};

/// Judge-facing key, e.g. "Semantic Coverage-Step".
std::string_view to_string(MetricName m);
std::optional<MetricName> parse_metric(std::string_view s);

inline constexpr double kMinScore = 1.0;
inline constexpr double kMaxScore = 10.0;
inline constexpr std::size_t kMinReasoningSteps = 3;

struct ReasoningStep {
  int index = 0;  // 1-based
  std::string text;

  friend bool operator==(const ReasoningStep&, const ReasoningStep&) = default;
};

struct ReasoningChain {
  std::vector<ReasoningStep> steps;
  std::string final_answer;

  /// Builds a chain with contiguous 1-based indices.
  static ReasoningChain from_texts(const std::vector<std::string>& texts,
                                   std::string final_answer);
  std::vector<std::string> step_texts() const;
  /// "Step 1: ...\nStep 2: ...\nFinal Answer: ..." rendering used in prompts.
  std::string render() const;

  friend bool operator==(const ReasoningChain&, const ReasoningChain&) = default;
};

enum class ImageKind { FilePath, Url, InlineBase64 };

std::string_view to_string(ImageKind k);
std::optional<ImageKind> parse_image_kind(std::string_view s);

struct ImageRef {
  ImageKind kind = ImageKind::FilePath;
  std::string value;
  std::string media_type;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

enum class VerificationState { Pending, InReview, Accepted, Rejected };

std::string_view to_string(VerificationState s);
std::optional<VerificationState> parse_verification_state(std::string_view s);

/// Optional curated per-stage texts (summary / caption / reasoning) used when
/// exporting multi-turn training conversations.
struct StageFields {
  std::optional<std::string> summary;
  std::optional<std::string> caption;
  std::optional<std::string> reasoning;

  bool empty() const { return !summary && !caption && !reasoning; }
  friend bool operator==(const StageFields&, const StageFields&) = default;
};

struct BenchmarkSample {
  std::string id;
  Category category = Category::VisualReasoning;
  std::string question;
  std::optional<std::vector<std::string>> choices;
  ImageRef image;
  ReasoningChain ground_truth;
  bool min_step_exempt = false;
  VerificationState verification_state = VerificationState::Pending;
  std::string provenance;
  StageFields stages;

  friend bool operator==(const BenchmarkSample&, const BenchmarkSample&) = default;
};

struct Violation {
  std::string code;  // e.g. "min-steps"
  std::string detail;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(std::string_view code) const;
  std::string summary() const;

  friend bool operator==(const ValidationResult&, const ValidationResult&) = default;
};

/// Reports every violated sample invariant. Never throws.
ValidationResult validate_sample(const BenchmarkSample& sample);

/// Checks an image reference on its own (non-empty value, media type
/// consistent with inline payloads).
std::vector<Violation> validate_image(const ImageRef& image);

class ScoreError : public std::invalid_argument {
 public:
  enum class Kind { MissingMetric, OutOfRange };

  ScoreError(Kind kind, std::string metric, const std::string& message)
      : std::invalid_argument(message), kind_(kind), metric_(std::move(metric)) {}

  Kind kind() const { return kind_; }
  const std::string& metric() const { return metric_; }

 private:
  Kind kind_;
  std::string metric_;
};

bool score_in_range(double v);

/// Arithmetic mean of the ten attribute scores.
/// Throws ScoreError when a metric is missing or a score lies outside [1,10].
double recompute_overall(const std::map<MetricName, double>& scores);

class JudgeScorecard {
 public:
  /// Validates and recomputes the overall score. Throws ScoreError.
  static JudgeScorecard make(const std::map<MetricName, double>& scores,
                             std::optional<double> judge_reported_overall = std::nullopt);

  double score(MetricName m) const { return scores_[static_cast<std::size_t>(m)]; }
  const std::array<double, kMetricCount>& scores() const { return scores_; }
  std::optional<double> judge_reported_overall() const { return judge_reported_overall_; }
  /// Locally recomputed mean; the judge's own overall is never used for it.
  double overall() const { return overall_; }

  friend bool operator==(const JudgeScorecard&, const JudgeScorecard&) = default;

 private:
  JudgeScorecard() = default;

  std::array<double, kMetricCount> scores_{};
  std::optional<double> judge_reported_overall_;
  double overall_ = 0.0;
};

std::string trim(std::string_view s);

}  // namespace cotbench
