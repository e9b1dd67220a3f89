#include "cotbench/eval_runner.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "cotbench/assets.hpp"
#include "cotbench/mock_backend.hpp"
#include "cotbench/util.hpp"

namespace cotbench {

namespace fs = std::filesystem;

void RunConfig::validate() const {
  if (run_id.empty()) throw ConfigError("run_id is empty");
  if (run_id.find_first_of("/\\") != std::string::npos || run_id == "." || run_id == "..") {
    throw ConfigError("run_id '" + run_id + "' is not a plain name");
  }
  if (concurrency == 0) throw ConfigError("concurrency must be positive");
  if (dataset_path.empty()) throw ConfigError("dataset path is empty");
  target.validate();
  judge.validate();
  if (beam) beam->validate();
}

Json to_json(const RunConfig& c) {
  Json j;
  j["run_id"] = c.run_id;
  j["dataset"] = c.dataset_path.string();
  j["target"] = to_json(c.target);
  j["judge"] = to_json(c.judge);
  if (c.beam) {
    Json b;
    b["num_beams"] = c.beam->num_beams;
    b["strategy"] = to_string(c.beam->strategy);
    b["temperature"] = c.beam->temperature;
    b["max_tokens"] = c.beam->max_tokens;
    j["beam"] = std::move(b);
  } else {
    j["beam"] = nullptr;
  }
  j["concurrency"] = c.concurrency;
  return j;
}

bool SampleResult::scored() const {
  return std::holds_alternative<JudgeScorecard>(scorecard) &&
         std::holds_alternative<FinalAnswerVerdict>(verdict);
}

bool operator==(const FinalAnswerVerdict& a, const FinalAnswerVerdict& b) {
  return a.score == b.score && a.raw_judge_text == b.raw_judge_text;
}

bool operator==(const SampleResult& a, const SampleResult& b) {
  return a.sample_id == b.sample_id && a.model_response == b.model_response &&
         a.scorecard == b.scorecard && a.verdict == b.verdict && a.ledger_delta == b.ledger_delta;
}

namespace {

Json error_json(const SampleError& e) { return Json{{"code", e.code}, {"message", e.message}}; }

SampleError error_from_json(const Json& j) {
  return {json_field::string(j, "code"), json_field::string(j, "message")};
}

}  // namespace

Json to_json(const SampleResult& r) {
  Json j;
  j["sample_id"] = r.sample_id;
  j["model_response"] = r.model_response;
  if (const auto* card = std::get_if<JudgeScorecard>(&r.scorecard)) {
    j["scorecard"] = to_json(*card);
  } else {
    j["scorecard_error"] = error_json(std::get<SampleError>(r.scorecard));
  }
  if (const auto* v = std::get_if<FinalAnswerVerdict>(&r.verdict)) {
    j["verdict"] = Json{{"score", v->score}, {"raw", v->raw_judge_text}};
  } else {
    j["verdict_error"] = error_json(std::get<SampleError>(r.verdict));
  }
  j["ledger_delta"] = to_json(r.ledger_delta);
  return j;
}

SampleResult sample_result_from_json(const Json& j) {
  SampleResult r;
  r.sample_id = json_field::string(j, "sample_id");
  r.model_response = json_field::string_or(j, "model_response", "");
  if (j.contains("scorecard")) {
    r.scorecard = parse_scorecard(j.at("scorecard").dump());
  } else {
    r.scorecard = error_from_json(json_field::require(j, "scorecard_error"));
  }
  if (j.contains("verdict")) {
    const auto& v = j.at("verdict");
    r.verdict = FinalAnswerVerdict{static_cast<int>(json_field::integer(v, "score")),
                                   json_field::string_or(v, "raw", "")};
  } else {
    r.verdict = error_from_json(json_field::require(j, "verdict_error"));
  }
  if (j.contains("ledger_delta")) r.ledger_delta = call_counts_from_json(j.at("ledger_delta"));
  return r;
}

AggregateReport aggregate(std::vector<SampleResult> results, const Dataset& dataset) {
  std::sort(results.begin(), results.end(),
            [](const SampleResult& a, const SampleResult& b) { return a.sample_id < b.sample_id; });

  struct Acc {
    std::size_t scored = 0;
    std::size_t failed = 0;
    double verdict_sum = 0.0;
    double overall_sum = 0.0;
    std::array<double, kMetricCount> metric_sum{};
    bool present = false;

    void add(const SampleResult& r) {
      present = true;
      if (!r.scored()) {
        ++failed;
        return;
      }
      const auto& card = std::get<JudgeScorecard>(r.scorecard);
      ++scored;
      verdict_sum += std::get<FinalAnswerVerdict>(r.verdict).score;
      overall_sum += card.overall();
      for (std::size_t i = 0; i < kMetricCount; ++i) metric_sum[i] += card.scores()[i];
    }

    ReportRow row(std::optional<Category> category) const {
      ReportRow out;
      out.category = category;
      out.scored = scored;
      out.failed = failed;
      if (scored > 0) {
        const auto n = static_cast<double>(scored);
        out.final_answer_pct = 100.0 * verdict_sum / n;
        out.step_score_pct = 10.0 * overall_sum / n;
        for (std::size_t i = 0; i < kMetricCount; ++i) out.metric_means[i] = metric_sum[i] / n;
      }
      return out;
    }
  };

  std::map<std::string, Category> category_of;
  for (const auto& s : dataset.samples) category_of[s.id] = s.category;

  std::array<Acc, kAllCategories.size()> per_category{};
  Acc overall;
  for (const auto& r : results) {
    const auto it = category_of.find(r.sample_id);
    if (it == category_of.end()) continue;
    per_category[static_cast<std::size_t>(it->second)].add(r);
    overall.add(r);
  }

  AggregateReport report;
  report.dataset = dataset.name;
  report.dataset_version = dataset.version;
  for (std::size_t i = 0; i < kAllCategories.size(); ++i) {
    if (per_category[i].present) report.categories.push_back(per_category[i].row(kAllCategories[i]));
  }
  if (overall.present) report.overall = overall.row(std::nullopt);
  return report;
}

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kResponses = "responses.jsonl";
constexpr const char* kScores = "scores.jsonl";

// Parses a JSONL file, dropping a torn final line left by a crash mid-write.
std::vector<Json> read_jsonl(const fs::path& path) {
  std::vector<Json> out;
  if (!fs::exists(path)) return out;
  const auto text = read_file(path);
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      out.push_back(Json::parse(lines[i]));
    } catch (const Json::parse_error&) {
      if (i + 1 == lines.size() && text.back() != '\n') break;
      throw RunError(path.string() + ": malformed line " + std::to_string(i + 1));
    }
  }
  return out;
}

std::string error_code(const std::exception& e) {
  if (const auto* j = dynamic_cast<const JudgeError*>(&e)) return j->code();
  if (dynamic_cast<const TransportError*>(&e)) return "TransportError";
  if (dynamic_cast<const ProtocolError*>(&e)) return "ProtocolError";
  if (dynamic_cast<const MockScriptError*>(&e)) return "MockScriptError";
  if (dynamic_cast<const InferenceError*>(&e)) return "InferenceError";
  if (dynamic_cast<const StrategyError*>(&e)) return "StrategyError";
  if (dynamic_cast<const GatewayError*>(&e)) return "GatewayError";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "InvalidInput";
  return "Error";
}

Json manifest_json(const RunConfig& config, const std::string& dataset_digest) {
  Json j;
  j["run_id"] = config.run_id;
  j["config"] = to_json(config);
  Json hashes = Json::object();
  for (const auto& a : assets::all()) hashes[a.name] = sha256_hex(a.bytes);
  j["prompt_hashes"] = std::move(hashes);
  j["dataset_digest"] = dataset_digest;
  return j;
}

struct CachedResponse {
  std::string text;
  CallCounts counts;
};

}  // namespace

std::vector<SampleResult> load_run_results(const fs::path& run_dir) {
  if (!fs::exists(run_dir / kManifest)) {
    throw RunError("run '" + run_dir.filename().string() + "' not found under " +
                   run_dir.parent_path().string());
  }
  std::vector<SampleResult> out;
  for (const auto& j : read_jsonl(run_dir / kScores)) out.push_back(sample_result_from_json(j));
  std::sort(out.begin(), out.end(),
            [](const SampleResult& a, const SampleResult& b) { return a.sample_id < b.sample_id; });
  return out;
}

EvaluationRun run_evaluation(Gateway& gateway, const RunConfig& config, const RunHooks& hooks) {
  config.validate();
  const Dataset dataset = load_dataset(config.dataset_path);
  const auto digest = sha256_hex(read_file(config.dataset_path));
  gateway.check_endpoint(config.target);
  gateway.check_endpoint(config.judge);

  const fs::path dir = config.run_dir();
  fs::create_directories(dir);
  std::unique_ptr<FileLock> lock;
  try {
    lock = std::make_unique<FileLock>(dir / "run");
  } catch (const LockError& e) {
    throw RunError("run '" + config.run_id + "' is in use: " + e.what());
  }

  const auto manifest_path = dir / kManifest;
  if (fs::exists(manifest_path)) {
    const auto previous = Json::parse(read_file(manifest_path));
    if (previous.value("dataset_digest", "") != digest) {
      throw RunError("run '" + config.run_id + "' was started on a different dataset");
    }
  } else {
    write_file_atomic(manifest_path, manifest_json(config, digest).dump(2) + "\n");
  }

  std::map<std::string, SampleResult> done;
  for (const auto& j : read_jsonl(dir / kScores)) {
    auto r = sample_result_from_json(j);
    done.insert_or_assign(r.sample_id, std::move(r));
  }
  std::map<std::string, CachedResponse> cached;
  for (const auto& j : read_jsonl(dir / kResponses)) {
    cached[json_field::string(j, "sample_id")] = {
        json_field::string(j, "model_response"),
        j.contains("ledger_delta") ? call_counts_from_json(j.at("ledger_delta")) : CallCounts{}};
  }

  std::vector<const BenchmarkSample*> pending;
  for (const auto& s : dataset.samples) {
    if (!done.count(s.id)) pending.push_back(&s);
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::vector<SampleResult> fresh;

  const auto process = [&](const BenchmarkSample& s) {
    SampleResult result;
    result.sample_id = s.id;
    CallCounts inference_counts;
    const auto cached_it = cached.find(s.id);
    if (cached_it != cached.end()) {
      result.model_response = cached_it->second.text;
      inference_counts = cached_it->second.counts;
    } else {
      InferenceQuery query{s.id, s.question, s.choices, s.image};
      try {
        if (config.beam) {
          const auto set = beam_generate(gateway, {config.target, config.judge}, query, *config.beam);
          result.model_response = set.selected_text();
          inference_counts = set.ledger_delta;
        } else {
          CallLedger scope;
          ChatRequest req;
          req.messages.push_back(question_message(query));
          req.max_tokens = 1024;
          req.temperature = 0.0;
          result.model_response = gateway.complete(config.target, req, Purpose::Generation, &scope).text();
          inference_counts = scope.counts();
        }
      } catch (const std::exception& e) {
        const SampleError err{error_code(e), std::string("inference failed: ") + e.what()};
        result.scorecard = err;
        result.verdict = err;
        result.ledger_delta = inference_counts;
        return result;
      }
      std::lock_guard lock(mu);
      append_line(dir / kResponses, Json{{"sample_id", s.id},
                                         {"model_response", result.model_response},
                                         {"ledger_delta", to_json(inference_counts)}}
                                        .dump());
    }

    CallLedger judge_scope;
    const auto question = format_question(s.question, s.choices);
    try {
      result.scorecard = score_steps(gateway, config.judge,
                                     {question, s.ground_truth, result.model_response}, s.id,
                                     &judge_scope);
    } catch (const std::exception& e) {
      result.scorecard = SampleError{error_code(e), e.what()};
    }
    try {
      result.verdict = judge_final_answer(gateway, config.judge, question,
                                          s.ground_truth.final_answer, result.model_response, s.id,
                                          &judge_scope);
    } catch (const std::exception& e) {
      result.verdict = SampleError{error_code(e), e.what()};
    }
    result.ledger_delta = inference_counts;
    result.ledger_delta += judge_scope.counts();
    return result;
  };

  const auto worker = [&] {
    while (!stop) {
      const auto i = next.fetch_add(1);
      if (i >= pending.size()) return;
      try {
        auto result = process(*pending[i]);
        {
          std::lock_guard lock(mu);
          append_line(dir / kScores, to_json(result).dump());
          fresh.push_back(result);
        }
        if (hooks.on_result) hooks.on_result(result);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
    }
  };

  const auto n = std::max<std::size_t>(1, std::min(config.concurrency, pending.size()));
  {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  EvaluationRun run;
  run.run_dir = dir;
  run.processed = fresh.size();
  for (auto& r : fresh) done.insert_or_assign(r.sample_id, std::move(r));
  for (auto& [id, r] : done) run.results.push_back(std::move(r));
  run.report = aggregate(run.results, dataset);

  write_file_atomic(dir / "report.json", render_report(run.report, ReportFormat::Json));
  write_file_atomic(dir / "report.md", render_report(run.report, ReportFormat::Markdown));
  write_file_atomic(dir / "report.csv", render_report(run.report, ReportFormat::Csv));
  return run;
}

}  // namespace cotbench
