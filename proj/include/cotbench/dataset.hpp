#pragma once

// Benchmark dataset persistence (JSONL, one sample per line), the minimum
// step filter and multi-turn SFT conversation export.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cotbench/core.hpp"
#include "cotbench/json_codec.hpp"
#include "cotbench/stages.hpp"

namespace cotbench {

struct Dataset {
  std::string name;
  std::string version;
  std::vector<BenchmarkSample> samples;

  const BenchmarkSample* find(const std::string& id) const;
};

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { Io, Parse, DuplicateId, Invalid, NotAccepted };

  DatasetError(Kind kind, std::size_t line, const std::string& message)
      : std::runtime_error(message), kind_(kind), line_(line) {}

  Kind kind() const { return kind_; }
  /// 1-based line number, 0 when not tied to a line.
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

/// Parses JSONL text. Blank lines are skipped but still counted for line
/// numbers. Every sample must pass validate_sample.
Dataset parse_dataset(std::string_view text, std::string name = {});

/// name = file stem, version = first 12 hex chars of the file's SHA-256.
Dataset load_dataset(const std::filesystem::path& path);

std::string serialize_dataset(const Dataset& dataset);

/// Whole-file rewrite under an exclusive writer lock.
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

/// Appends a single validated sample under the writer lock.
void append_sample(const std::filesystem::path& path, const BenchmarkSample& sample);

struct FilterResult {
  Dataset kept;
  std::vector<std::string> dropped;
};

/// Keeps samples with at least three steps or an explicit exemption.
FilterResult filter_min_steps(const Dataset& dataset);

enum class Role { Human, Assistant };

std::string_view to_string(Role r);

struct SftTurn {
  Role role = Role::Human;
  std::string text;
  std::optional<ImageRef> image;
};

struct SftConversation {
  std::string id;
  std::vector<SftTurn> turns;
};

struct SftExportReport {
  std::size_t total = 0;
  std::vector<std::string> synthesized_captions;
};

/// Builds the 8-turn conversation for one sample. Sets *caption_synthesized
/// when the caption turn had to be derived from the ground-truth steps.
SftConversation build_sft_conversation(const BenchmarkSample& sample,
                                       const StagePromptSet& prompts,
                                       bool* caption_synthesized = nullptr);

/// Streams one conversation per sample to `sink`. Throws DatasetError
/// (NotAccepted) before emitting anything if any sample is not Accepted.
SftExportReport export_sft(const Dataset& dataset, const StagePromptSet& prompts,
                           const std::function<void(const SftConversation&)>& sink);

Json to_json(const SftConversation& conversation);
Json to_json(const SftExportReport& report);

}  // namespace cotbench
