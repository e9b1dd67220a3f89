#include "cotbench/json_codec.hpp"

namespace cotbench {

namespace json_field {

const Json& require(const Json& obj, const char* key) {
  if (!obj.is_object()) throw FormatError("expected a JSON object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(std::string("missing field '") + key + "'");
  return *it;
}

std::string string(const Json& obj, const char* key) {
  const Json& v = require(obj, key);
  if (!v.is_string()) throw FormatError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::string string_or(const Json& obj, const char* key, std::string fallback) {
  if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
  return string(obj, key);
}

long long integer(const Json& obj, const char* key) {
  const Json& v = require(obj, key);
  if (!v.is_number_integer()) {
    throw FormatError(std::string("field '") + key + "' must be an integer");
  }
  return v.get<long long>();
}

double number(const Json& obj, const char* key) {
  const Json& v = require(obj, key);
  if (!v.is_number()) throw FormatError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

bool boolean(const Json& obj, const char* key) {
  const Json& v = require(obj, key);
  if (!v.is_boolean()) throw FormatError(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

}  // namespace json_field

namespace jf = json_field;

Json to_json(const ImageRef& image) {
  Json j;
  j["kind"] = to_string(image.kind);
  j["value"] = image.value;
  j["media_type"] = image.media_type;
  return j;
}

ImageRef image_from_json(const Json& j) {
  ImageRef image;
  const auto kind = jf::string(j, "kind");
  const auto parsed = parse_image_kind(kind);
  if (!parsed) throw FormatError("unknown image kind '" + kind + "'");
  image.kind = *parsed;
  image.value = jf::string(j, "value");
  image.media_type = jf::string_or(j, "media_type", "");
  return image;
}

Json to_json(const ReasoningChain& chain) {
  Json j;
  Json steps = Json::array();
  for (const auto& s : chain.steps) steps.push_back(s.text);
  j["steps"] = std::move(steps);
  j["final_answer"] = chain.final_answer;
  return j;
}

ReasoningChain chain_from_json(const Json& j) {
  const Json& steps = jf::require(j, "steps");
  if (!steps.is_array()) throw FormatError("field 'steps' must be an array");
  std::vector<std::string> texts;
  for (const auto& s : steps) {
    if (!s.is_string()) throw FormatError("reasoning steps must be strings");
    texts.push_back(s.get<std::string>());
  }
  return ReasoningChain::from_texts(texts, jf::string(j, "final_answer"));
}

Json to_json(const BenchmarkSample& sample) {
  Json j;
  j["id"] = sample.id;
  j["category"] = to_string(sample.category);
  j["question"] = sample.question;
  if (sample.choices) {
    j["choices"] = *sample.choices;
  } else {
    j["choices"] = nullptr;
  }
  j["image"] = to_json(sample.image);
  j["ground_truth"] = to_json(sample.ground_truth);
  j["min_step_exempt"] = sample.min_step_exempt;
  j["verification_state"] = to_string(sample.verification_state);
  j["provenance"] = sample.provenance;
  if (!sample.stages.empty()) {
    Json stages;
    if (sample.stages.summary) stages["summary"] = *sample.stages.summary;
    if (sample.stages.caption) stages["caption"] = *sample.stages.caption;
    if (sample.stages.reasoning) stages["reasoning"] = *sample.stages.reasoning;
    j["stages"] = std::move(stages);
  }
  return j;
}

BenchmarkSample sample_from_json(const Json& j) {
  BenchmarkSample s;
  s.id = jf::string(j, "id");
  const auto category = jf::string(j, "category");
  const auto parsed_category = parse_category(category);
  if (!parsed_category) throw FormatError("unknown category '" + category + "'");
  s.category = *parsed_category;
  s.question = jf::string(j, "question");
  if (j.contains("choices") && !j.at("choices").is_null()) {
    const Json& choices = j.at("choices");
    if (!choices.is_array()) throw FormatError("field 'choices' must be an array or null");
    std::vector<std::string> out;
    for (const auto& c : choices) {
      if (!c.is_string()) throw FormatError("choices must be strings");
      out.push_back(c.get<std::string>());
    }
    s.choices = std::move(out);
  }
  s.image = image_from_json(jf::require(j, "image"));
  s.ground_truth = chain_from_json(jf::require(j, "ground_truth"));
  s.min_step_exempt = j.contains("min_step_exempt") ? jf::boolean(j, "min_step_exempt") : false;
  const auto state = jf::string_or(j, "verification_state", "Pending");
  const auto parsed_state = parse_verification_state(state);
  if (!parsed_state) throw FormatError("unknown verification_state '" + state + "'");
  s.verification_state = *parsed_state;
  s.provenance = jf::string_or(j, "provenance", "");
  if (j.contains("stages") && !j.at("stages").is_null()) {
    const Json& st = j.at("stages");
    if (!st.is_object()) throw FormatError("field 'stages' must be an object");
    if (st.contains("summary")) s.stages.summary = jf::string(st, "summary");
    if (st.contains("caption")) s.stages.caption = jf::string(st, "caption");
    if (st.contains("reasoning")) s.stages.reasoning = jf::string(st, "reasoning");
  }
  return s;
}

Json to_json(const JudgeScorecard& card) {
  Json j;
  for (MetricName m : kAllMetrics) j[std::string(to_string(m))] = card.score(m);
  j["Overall Score"] = card.judge_reported_overall().value_or(card.overall());
  return j;
}

}  // namespace cotbench
