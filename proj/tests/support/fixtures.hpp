#pragma once

// Shared builders for the unit and acceptance suites.

#include <stdlib.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "cotbench/core.hpp"
#include "cotbench/dataset.hpp"
#include "cotbench/eval_runner.hpp"
#include "cotbench/gateway.hpp"
#include "cotbench/mock_backend.hpp"
#include "cotbench/util.hpp"

namespace cotbench::fixtures {

class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "cotbench-XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline EndpointConfig mock_endpoint(const std::string& name, int max_in_flight = 8) {
  EndpointConfig e;
  e.base_url = "mock://" + name;
  e.model_id = name + "-model";
  e.max_in_flight = max_in_flight;
  e.requests_per_minute = 1'000'000;
  e.max_retries = 3;
  e.initial_backoff = Millis(1);
  return e;
}

/// Matches when every needle occurs in the request's concatenated text.
inline RouteMatcher match_all(std::vector<std::string> needles) {
  std::string description = "all-of";
  for (const auto& n : needles) description += ":" + n;
  return {[needles](const ChatRequest& r) {
            const auto text = r.concatenated_text();
            for (const auto& n : needles) {
              if (text.find(n) == std::string::npos) return false;
            }
            return true;
          },
          description};
}

inline BenchmarkSample make_sample(const std::string& id, std::size_t steps,
                                   Category category = Category::ChartsDiagramUnderstanding,
                                   bool exempt = false) {
  BenchmarkSample s;
  s.id = id;
  s.category = category;
  s.question = "What does chart " + id + " show?";
  s.image = {ImageKind::FilePath, "images/" + id + ".png", "image/png"};
  std::vector<std::string> texts;
  for (std::size_t i = 1; i <= steps; ++i) {
    texts.push_back("Read value " + std::to_string(i) + " of chart " + id + ".");
  }
  s.ground_truth = ReasoningChain::from_texts(texts, "42");
  s.min_step_exempt = exempt;
  s.verification_state = VerificationState::Accepted;
  s.provenance = "fixture";
  return s;
}

/// The chart question from the multi-step training example: one accepted
/// sample whose curated stages yield an 8-turn conversation ending in "0.61".
inline BenchmarkSample middle_income_sample() {
  BenchmarkSample s;
  s.id = "chart-middle-income-1971";
  s.category = Category::ChartsDiagramUnderstanding;
  s.question =
      "What was the value of the middle-income share in 1971? Answer the question using a "
      "single word or phrase.";
  s.image = {ImageKind::FilePath, "images/middle_income.png", "image/png"};
  const std::string summary =
      "I will examine the image to find the relevant data for the middle-income share in 1971 "
      "and present the answer in the specified format.";
  const std::string caption =
      "The image displays a bar chart comparing the percentage of adults in the lower, middle, "
      "and upper-income tiers for the years 2015 and 1971. It shows that in 1971, the "
      "middle-income share was 61%.";
  const std::string reasoning =
      "To solve the problem, I will look for the specific percentage associated with the "
      "middle-income group in the year 1971 from the provided chart. The image clearly shows "
      "that in 1971, the middle-income tier accounted for 61% of adults.";
  s.ground_truth = ReasoningChain::from_texts({summary, caption, reasoning}, "0.61");
  s.stages = {summary, caption, reasoning};
  s.verification_state = VerificationState::Accepted;
  s.provenance = "chart-qa";
  return s;
}

inline std::string scorecard_text(const std::array<double, kMetricCount>& values,
                                  double reported) {
  std::string out = "{";
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", values[i]);
    out += "'" + std::string(to_string(kAllMetrics[i])) + "': " + buf + ", ";
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", reported);
  return out + "'Overall Score': " + buf + "}";
}

inline std::string uniform_scorecard(double v) {
  std::array<double, kMetricCount> a{};
  a.fill(v);
  return scorecard_text(a, v);
}

/// Sleeps a seeded random 0-2 ms before delegating, to perturb completion order.
class JitterBackend final : public ChatBackend {
 public:
  JitterBackend(std::shared_ptr<ChatBackend> inner, unsigned seed) : inner_(std::move(inner)), rng_(seed) {}

  ChatResponse send(const EndpointConfig& endpoint, const ChatRequest& request) override {
    int delay_us = 0;
    {
      std::lock_guard lock(mu_);
      delay_us = std::uniform_int_distribution<int>(0, 2000)(rng_);
    }
    std::this_thread::sleep_for(std::chrono::microseconds(delay_us));
    return inner_->send(endpoint, request);
  }
  bool supports_multi_sample() const override { return inner_->supports_multi_sample(); }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::mutex mu_;
  std::mt19937 rng_;
};

/// A fully scripted evaluation: N samples across all categories, one target
/// reply, one scorecard and one verdict per sample.
class EvalFixture {
 public:
  struct Mocks {
    std::shared_ptr<MockBackend> target;
    std::shared_ptr<MockBackend> judge;
    std::vector<MockHandle> generation;
    std::vector<MockHandle> steps;
    std::vector<MockHandle> verdicts;
  };

  explicit EvalFixture(std::size_t n, std::set<std::size_t> malformed_scorecards = {})
      : n_(n), malformed_(std::move(malformed_scorecards)) {
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
      auto s = make_sample(id(i), 3, kAllCategories[i % kAllCategories.size()]);
      s.question = marker(i) + ": what value does the highlighted bar show?";
      s.ground_truth.final_answer = "A" + std::to_string(i);
      d.samples.push_back(std::move(s));
    }
    dataset_path_ = dir_ / "bench.jsonl";
    save_dataset(dataset_path_, d);
    dataset_ = load_dataset(dataset_path_);
  }

  static std::string id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%03zu", i);
    return buf;
  }
  static std::string marker(std::size_t i) { return "Question " + id(i); }

  /// Deterministic per-sample scores in [1, 10].
  static std::array<double, kMetricCount> scores(std::size_t i) {
    std::array<double, kMetricCount> a{};
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      a[m] = 1.0 + static_cast<double>((i * 7 + m * 3) % 91) / 10.0;
    }
    return a;
  }
  static int verdict(std::size_t i) { return i % 3 == 0 ? 0 : 1; }

  /// Fresh scripted backends registered on `gateway`.
  Mocks wire(Gateway& gateway, std::optional<unsigned> jitter_seed = std::nullopt) const {
    Mocks m{std::make_shared<MockBackend>(), std::make_shared<MockBackend>(), {}, {}, {}};
    for (std::size_t i = 0; i < n_; ++i) {
      m.generation.push_back(m.target->script(
          RouteMatcher::substring(marker(i)),
          {reply_text("Step 1: Locate the bar.\nStep 2: Read its label.\nStep 3: Compare.\n"
                      "Final Answer: A" + std::to_string(i))}));
      const auto card = malformed_.count(i) ? std::string("I think the response is fine.")
                                            : scorecard_text(scores(i), 5.0);
      m.steps.push_back(m.judge->script(match_all({"reasoning evaluator", marker(i)}),
                                        {reply_text(card)}));
      m.verdicts.push_back(m.judge->script(match_all({"Evaluate the following answer", marker(i)}),
                                           {reply_text(std::to_string(verdict(i)))}));
    }
    std::shared_ptr<ChatBackend> target = m.target;
    std::shared_ptr<ChatBackend> judge = m.judge;
    if (jitter_seed) {
      target = std::make_shared<JitterBackend>(target, *jitter_seed);
      judge = std::make_shared<JitterBackend>(judge, *jitter_seed + 1);
    }
    gateway.register_backend(target_endpoint().base_url, target);
    gateway.register_backend(judge_endpoint().base_url, judge);
    return m;
  }

  static EndpointConfig target_endpoint() { return mock_endpoint("target"); }
  static EndpointConfig judge_endpoint() { return mock_endpoint("judge"); }

  RunConfig config(const std::string& run_id, std::size_t concurrency) const {
    RunConfig c;
    c.dataset_path = dataset_path_;
    c.target = target_endpoint();
    c.judge = judge_endpoint();
    c.concurrency = concurrency;
    c.run_id = run_id;
    c.runs_root = dir_ / "runs";
    return c;
  }

  const Dataset& dataset() const { return dataset_; }
  const std::filesystem::path& dataset_path() const { return dataset_path_; }
  const TempDir& dir() const { return dir_; }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::set<std::size_t> malformed_;
  TempDir dir_;
  std::filesystem::path dataset_path_;
  Dataset dataset_;
};

}  // namespace cotbench::fixtures
