#pragma once

// JSON encodings of the core domain types. Samples use the canonical JSONL
// dataset field layout; key order is fixed so re-encoding is byte-stable.

#include <stdexcept>
#include <string>

#include "cotbench/core.hpp"
#include "json.hpp"

namespace cotbench {

using Json = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json to_json(const ImageRef& image);
ImageRef image_from_json(const Json& j);

Json to_json(const ReasoningChain& chain);
ReasoningChain chain_from_json(const Json& j);

/// Field order: id, category, question, choices, image, ground_truth,
/// min_step_exempt, verification_state, provenance[, stages].
Json to_json(const BenchmarkSample& sample);
/// Throws FormatError on missing fields or wrong types. Does not run
/// validate_sample.
BenchmarkSample sample_from_json(const Json& j);

/// {"Faithfulness-Step": ..., ..., "Missing Step": ..., "Overall Score": ...}
/// "Overall Score" carries the judge's reported value when present, else the
/// recomputed mean.
Json to_json(const JudgeScorecard& card);

// Typed field accessors shared by the JSON readers in this project.
namespace json_field {
const Json& require(const Json& obj, const char* key);
std::string string(const Json& obj, const char* key);
std::string string_or(const Json& obj, const char* key, std::string fallback);
long long integer(const Json& obj, const char* key);
double number(const Json& obj, const char* key);
bool boolean(const Json& obj, const char* key);
}  // namespace json_field

}  // namespace cotbench
