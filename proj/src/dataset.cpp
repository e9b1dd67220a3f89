#include "cotbench/dataset.hpp"

#include <unordered_set>

#include "cotbench/util.hpp"

namespace cotbench {

const BenchmarkSample* Dataset::find(const std::string& id) const {
  for (const auto& s : samples) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

Dataset parse_dataset(std::string_view text, std::string name) {
  Dataset dataset;
  dataset.name = std::move(name);
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    if (trim(raw).empty()) continue;
    BenchmarkSample sample;
    try {
      sample = sample_from_json(Json::parse(raw));
    } catch (const Json::exception& e) {
      throw DatasetError(DatasetError::Kind::Parse, line_no,
                         "line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    } catch (const FormatError& e) {
      throw DatasetError(DatasetError::Kind::Parse, line_no,
                         "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(sample.id).second) {
      throw DatasetError(DatasetError::Kind::DuplicateId, line_no,
                         "line " + std::to_string(line_no) + ": duplicate sample id '" +
                             sample.id + "'");
    }
    const auto validation = validate_sample(sample);
    if (!validation.ok()) {
      throw DatasetError(DatasetError::Kind::Invalid, line_no,
                         "line " + std::to_string(line_no) + ": sample '" + sample.id +
                             "' is invalid: " + validation.summary());
    }
    dataset.samples.push_back(std::move(sample));
  }
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw DatasetError(DatasetError::Kind::Io, 0, "dataset not found: " + path.string());
  }
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error& e) {
    throw DatasetError(DatasetError::Kind::Io, 0, e.what());
  }
  auto dataset = parse_dataset(text, path.stem().string());
  dataset.version = sha256_hex(text).substr(0, 12);
  return dataset;
}

std::string serialize_dataset(const Dataset& dataset) {
  std::string out;
  for (const auto& s : dataset.samples) {
    out += to_json(s).dump();
    out.push_back('\n');
  }
  return out;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  FileLock lock(path);
  write_file_atomic(path, serialize_dataset(dataset));
}

void append_sample(const std::filesystem::path& path, const BenchmarkSample& sample) {
  const auto validation = validate_sample(sample);
  if (!validation.ok()) {
    throw DatasetError(DatasetError::Kind::Invalid, 0,
                       "sample '" + sample.id + "' is invalid: " + validation.summary());
  }
  FileLock lock(path);
  append_line(path, to_json(sample).dump());
}

FilterResult filter_min_steps(const Dataset& dataset) {
  FilterResult result;
  result.kept.name = dataset.name;
  result.kept.version = dataset.version;
  for (const auto& s : dataset.samples) {
    if (s.min_step_exempt || s.ground_truth.steps.size() >= kMinReasoningSteps) {
      result.kept.samples.push_back(s);
    } else {
      result.dropped.push_back(s.id);
    }
  }
  return result;
}

std::string_view to_string(Role r) { return r == Role::Human ? "human" : "assistant"; }

namespace {

std::string join_steps(const ReasoningChain& chain) {
  std::string out;
  for (const auto& s : chain.steps) {
    if (!out.empty()) out.push_back(' ');
    out += s.text;
  }
  return out;
}

std::string step_text_or_empty(const ReasoningChain& chain, std::size_t i) {
  return i < chain.steps.size() ? chain.steps[i].text : std::string{};
}

}  // namespace

SftConversation build_sft_conversation(const BenchmarkSample& sample,
                                       const StagePromptSet& prompts,
                                       bool* caption_synthesized) {
  const auto& gt = sample.ground_truth;
  // Missing curated stages fall back to the ground truth: the first step
  // stands in for the summary, the second (or only) step for the caption.
  const std::string summary = sample.stages.summary.value_or(step_text_or_empty(gt, 0));
  const bool synth_caption = !sample.stages.caption || trim(*sample.stages.caption).empty();
  const std::string caption =
      synth_caption ? step_text_or_empty(gt, gt.steps.size() > 1 ? 1 : 0) : *sample.stages.caption;
  const std::string reasoning = sample.stages.reasoning.value_or(join_steps(gt));
  if (caption_synthesized) *caption_synthesized = synth_caption;

  SftConversation conv;
  conv.id = sample.id;
  const auto human = [&](std::string text, std::optional<ImageRef> image = std::nullopt) {
    conv.turns.push_back({Role::Human, std::move(text), std::move(image)});
  };
  const auto assistant = [&](std::string text) {
    conv.turns.push_back({Role::Assistant, std::move(text), std::nullopt});
  };

  human(format_question(sample.question, sample.choices) + " " + prompts.prompt(Stage::Summary),
        sample.image);
  assistant(summary);
  human(prompts.prompt(Stage::Caption));
  assistant(caption);
  human(prompts.prompt(Stage::Reasoning));
  assistant(reasoning);
  human(prompts.prompt(Stage::Conclusion));
  assistant(gt.final_answer);
  return conv;
}

SftExportReport export_sft(const Dataset& dataset, const StagePromptSet& prompts,
                           const std::function<void(const SftConversation&)>& sink) {
  prompts.validate();
  for (const auto& s : dataset.samples) {
    if (s.verification_state != VerificationState::Accepted) {
      throw DatasetError(DatasetError::Kind::NotAccepted, 0,
                         "sample '" + s.id + "' is " + std::string(to_string(s.verification_state)) +
                             "; only Accepted samples can be exported");
    }
  }
  SftExportReport report;
  for (const auto& s : dataset.samples) {
    bool synthesized = false;
    sink(build_sft_conversation(s, prompts, &synthesized));
    if (synthesized) report.synthesized_captions.push_back(s.id);
    ++report.total;
  }
  return report;
}

Json to_json(const SftConversation& conversation) {
  Json j;
  j["id"] = conversation.id;
  Json turns = Json::array();
  for (const auto& t : conversation.turns) {
    Json turn;
    turn["role"] = to_string(t.role);
    turn["text"] = t.text;
    if (t.image) turn["image"] = to_json(*t.image);
    turns.push_back(std::move(turn));
  }
  j["turns"] = std::move(turns);
  return j;
}

Json to_json(const SftExportReport& report) {
  Json j;
  j["total"] = report.total;
  j["synthesized_captions"] = report.synthesized_captions;
  return j;
}

}  // namespace cotbench
