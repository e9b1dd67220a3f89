// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <string>

#include "cotbench/assets.hpp"
#include "cotbench/beam.hpp"
#include "cotbench/curation.hpp"
#include "cotbench/eval_runner.hpp"
#include "cotbench/judge.hpp"
#include "fixtures.hpp"

namespace {

using namespace cotbench;
using fixtures::EvalFixture;
using fixtures::make_sample;
using fixtures::mock_endpoint;

struct Failure {
  std::string what;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

template <typename Fn>
bool throws(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception&) {
    return true;
  }
  return false;
}

// ---- scorecard oracle ----

void scorecard_oracle() {
  const std::string line =
      "{'Faithfulness-Step': 8.0, 'Faithfulness-Token': 7.5, 'Informativeness-Step': 8.5, "
      "'Repetition-Token': 9.0, 'Hallucination': 9.5, 'Redundancy': 8.0, "
      "'Semantic Coverage-Step': 8.5, 'Reasoning Alignment': 8.0, 'Commonsense': 9.0, "
      "'Missing Step': 8.5 , 'Overall Score': 8.65}";
  const std::array<double, kMetricCount> expected = {8.0, 7.5, 8.5, 9.0, 9.5, 8.0, 8.5, 8.0, 9.0, 8.5};
  const auto start = std::chrono::steady_clock::now();
  const auto card = parse_scorecard(line);
  expect(card.scores() == expected, "ten attribute values");
  expect(card.judge_reported_overall() == 8.65, "reported overall 8.65");
  expect(std::fabs(card.overall() - 8.45) <= 1e-9, "recomputed overall 8.45");
  expect(parse_scorecard("```python\n" + line + "\n```") == card, "fenced form");
  expect(parse_scorecard("```\n" + line + "\n```\n") == card, "bare fence");
  expect(std::chrono::steady_clock::now() - start < std::chrono::seconds(1), "runtime");
}

// ---- overall-mean property ----

void overall_mean_property() {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> in_range(1.0, 10.0);
  const auto start = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 1000; ++trial) {
    std::map<MetricName, double> scores;
    double sum = 0.0;
    for (auto m : kAllMetrics) {
      scores[m] = in_range(rng);
      sum += scores[m];
    }
    expect(std::fabs(recompute_overall(scores) - sum / kMetricCount) <= 1e-9, "mean");
    expect(std::fabs(JudgeScorecard::make(scores).overall() - sum / kMetricCount) <= 1e-9, "scorecard mean");

    auto missing = scores;
    missing.erase(kAllMetrics[rng() % kMetricCount]);
    expect(throws([&] { recompute_overall(missing); }), "missing key rejected");

    auto out = scores;
    const double bad = rng() % 2 ? 10.0 + 1e-6 + in_range(rng) : 1.0 - 1e-6 - in_range(rng) / 10.0;
    out[kAllMetrics[rng() % kMetricCount]] = bad;
    expect(throws([&] { recompute_overall(out); }), "out-of-range rejected");

    std::array<double, kMetricCount> values{};
    for (std::size_t i = 0; i < kMetricCount; ++i) values[i] = scores[kAllMetrics[i]];
    const auto text = fixtures::scorecard_text(values, 5.0);
    expect(throws([&] { parse_scorecard("{'Clarity': 5.0, " + text.substr(1)); }), "extra key rejected");
  }
  expect(std::chrono::steady_clock::now() - start < std::chrono::seconds(5), "runtime");
}

// ---- min-steps filter ----

void min_steps_filter() {
  Dataset d;
  d.samples = {make_sample("three", 3), make_sample("two-exempt", 2, Category::VisualReasoning, true),
               make_sample("two", 2)};
  const auto once = filter_min_steps(d);
  expect(once.kept.samples.size() == 2, "kept two");
  expect(once.kept.samples[0].id == "three" && once.kept.samples[1].id == "two-exempt", "kept ids");
  const auto twice = filter_min_steps(once.kept);
  expect(twice.kept.samples == once.kept.samples && twice.dropped.empty(), "idempotent");
}

// ---- call accounting ----

struct Rig {
  Gateway gateway{std::make_shared<VirtualClock>()};
  std::shared_ptr<MockBackend> target = std::make_shared<MockBackend>();
  std::shared_ptr<MockBackend> judge = std::make_shared<MockBackend>();
  BeamEndpoints endpoints{mock_endpoint("target"), mock_endpoint("judge")};

  Rig() {
    gateway.register_backend(endpoints.target.base_url, target);
    gateway.register_backend(endpoints.judge->base_url, judge);
  }
};

InferenceQuery query() {
  InferenceQuery q;
  q.id = "q";
  q.question = "How many bars exceed 50%?";
  q.image = ImageRef{ImageKind::Url, "https://img.example/chart.png", ""};
  return q;
}

BeamConfig beam(int b, SelectionStrategy s) {
  BeamConfig c;
  c.num_beams = b;
  c.strategy = s;
  return c;
}

void call_accounting() {
  for (int b = 1; b <= 4; ++b) {
    for (auto s : {SelectionStrategy::LogProb, SelectionStrategy::MajorityAnswer}) {
      Rig rig;
      std::vector<Candidate> c;
      for (int i = 0; i < b; ++i) c.push_back({"Final Answer: " + std::to_string(i % 2), -1.0 - i, 2});
      rig.target->script(RouteMatcher::any(), {reply_candidates(c)});
      const auto set = beam_generate(rig.gateway, rig.endpoints, query(), beam(b, s));
      expect(set.ledger_delta.generation_calls == static_cast<std::uint64_t>(b), "beam generation calls");
      expect(set.ledger_delta.judge_calls == 0, "beam judge calls");
      expect(rig.gateway.ledger().counts() == set.ledger_delta, "global ledger");
    }
    Rig rig;
    std::vector<Candidate> c(static_cast<std::size_t>(b), Candidate{"Final Answer: x", std::nullopt, std::nullopt});
    rig.target->script(RouteMatcher::any(), {reply_candidates(c)});
    rig.judge->script(RouteMatcher::any(), {reply_text("1")});
    const auto set = beam_generate(rig.gateway, rig.endpoints, query(), beam(b, SelectionStrategy::JudgeRank));
    expect(set.ledger_delta.judge_calls == (b > 1 ? 1u : 0u), "judge-rank judge calls");
  }
  for (int b : {1, 4}) {
    Rig rig;
    std::vector<MockReply> gens;
    for (int stage = 0; stage < 4; ++stage) {
      gens.push_back(reply_candidates(
          std::vector<Candidate>(static_cast<std::size_t>(b), Candidate{"stage text", std::nullopt, std::nullopt})));
    }
    rig.target->script(RouteMatcher::any(), gens);
    rig.judge->script(RouteMatcher::any(), std::vector<MockReply>(12, reply_text("1")));
    const auto set = stage_level_generate(rig.gateway, rig.endpoints, query(), beam(b, SelectionStrategy::Auto));
    const CallCounts want{static_cast<std::uint64_t>(4 * b), static_cast<std::uint64_t>(4 * (b - 1)), 0};
    expect(set.ledger_delta == want, "stage-level calls for B=" + std::to_string(b));
  }
}

// ---- selection ----

void selection() {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    std::vector<Candidate> c;
    for (int i = 0; i < n; ++i) {
      c.push_back({"Final Answer: " + std::to_string(rng() % 3), -static_cast<double>(rng() % 40) / 3.0,
                   1 + static_cast<int>(rng() % 9)});
    }
    for (auto s : {SelectionStrategy::LogProb, SelectionStrategy::MajorityAnswer}) {
      expect(select_best(c, s, {}).index < c.size(), "selected among candidates");
    }
  }
  for (auto s : {SelectionStrategy::Auto, SelectionStrategy::LogProb, SelectionStrategy::JudgeRank,
                 SelectionStrategy::MajorityAnswer}) {
    expect(select_best({{"only", std::nullopt, std::nullopt}}, s, {}).index == 0, "B=1 identity");
  }
  const std::vector<Candidate> tie = {{"Final Answer: A", {}, {}}, {"Final Answer: B", {}, {}},
                                      {"Final Answer: b", {}, {}}, {"Final Answer: a", {}, {}}};
  expect(select_best(tie, SelectionStrategy::MajorityAnswer, {}).index == 0, "majority tie lowest index");
  const std::vector<Candidate> lp = {{"x", -6.0, 3}, {"y", -6.0, 2}};
  const std::vector<Candidate> lp2 = {{"x", -6.0, 2}, {"y", -6.0, 3}};
  expect(select_best(lp2, SelectionStrategy::LogProb, {}).index == 1, "length-normalized logprob");
  expect(select_best(lp, SelectionStrategy::LogProb, {}).index == 0, "length-normalized logprob reversed");
}

// ---- aggregation determinism ----

JudgeScorecard uniform_card(double v) {
  std::map<MetricName, double> m;
  for (auto name : kAllMetrics) m[name] = v;
  return JudgeScorecard::make(m);
}

void aggregation_determinism() {
  EvalFixture fx(50, {5});
  std::string first;
  std::string second;
  EvaluationRun run;
  {
    Gateway g;
    fx.wire(g, 1u);
    run = run_evaluation(g, fx.config("a", 8));
    first = read_file(run.run_dir / "report.json");
  }
  {
    Gateway g;
    fx.wire(g, 2u);
    second = read_file(run_evaluation(g, fx.config("b", 3)).run_dir / "report.json");
  }
  expect(first == second, "byte-identical report.json");

  double fa = 0;
  double st = 0;
  std::size_t n = 0;
  for (const auto& row : run.report.categories) {
    fa += *row.final_answer_pct * static_cast<double>(row.scored);
    st += *row.step_score_pct * static_cast<double>(row.scored);
    n += row.scored;
  }
  expect(std::fabs(fa / n - *run.report.overall->final_answer_pct) <= 1e-9, "weighted final answer");
  expect(std::fabs(st / n - *run.report.overall->step_score_pct) <= 1e-9, "weighted step score");

  Dataset d;
  for (const char* id : {"a", "b", "c", "d"}) d.samples.push_back(make_sample(id, 3));
  const std::vector<std::pair<double, int>> fixture = {{8, 1}, {6, 0}, {7, 1}, {9, 1}};
  std::vector<SampleResult> results;
  for (std::size_t i = 0; i < fixture.size(); ++i) {
    results.push_back({d.samples[i].id, "r", uniform_card(fixture[i].first),
                       FinalAnswerVerdict{fixture[i].second, ""}, {}});
  }
  const auto report = aggregate(results, d);
  expect(std::fabs(*report.overall->final_answer_pct - 75.0) <= 1e-9, "fixture final 75.0");
  expect(std::fabs(*report.overall->step_score_pct - 75.0) <= 1e-9, "fixture steps 75.0");
}

// ---- prompt fidelity ----

void prompt_fidelity() {
  expect(sha256_hex(assets::reasoning_generation_prompt()) ==
             "92656e1d555b0359002b0578873684e39856507ad5c5f186119e790bcd96a5da",
         "generation prompt hash");
  expect(sha256_hex(assets::step_evaluator_prompt()) ==
             "07afb80719ff5c2532c3e6e5f4917728be4aae0dfff26e8bf4d28d95a83b0837",
         "step evaluator prompt hash");
  expect(sha256_hex(assets::final_answer_system_prompt()) ==
             "bf078ad71a4c1ecbe0e795dc5edbdcd45b35452544e43972d6f71c80803690bd",
         "final answer system prompt hash");
  expect(sha256_hex(assets::final_answer_user_template()) ==
             "af3eec67dfbeb602d0533003a123a9a6f78a6ef5cd4637d6cd6d8b7598628509",
         "final answer template hash");

  const auto req = build_step_eval_messages(
      {"q", ReasoningChain::from_texts({"a", "b", "c"}, "3"), "Step 1: a\nFinal Answer: 3"});
  expect(req.temperature == 0.0 && req.max_tokens == 500, "step eval sampling");
  expect(req.system == std::string(assets::step_evaluator_prompt()), "step eval system prompt");

  Rig rig;
  rig.judge->script(RouteMatcher::any(), {reply_text("1")});
  const auto verdict = judge_final_answer(rig.gateway, *rig.endpoints.judge, "q", "3", "3", "s");
  const auto sent = rig.judge->received().at(0);
  expect(verdict.score == 1, "verdict parsed");
  expect(sent.max_tokens == 10, "verdict max_tokens");
}

// ---- curation state machine ----

struct Model {
  VerificationState state = VerificationState::Pending;
  std::size_t steps = 0;
  bool exempt = false;
};

bool model_legal(const Model& m, const EventKind& k) {
  const bool review = m.state == VerificationState::InReview;
  const int n = static_cast<int>(m.steps);
  return std::visit(
      [&](const auto& e) -> bool {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, event::Generated>) return m.state == VerificationState::Pending;
        if constexpr (std::is_same_v<T, event::EditedStep>) return review && e.index >= 1 && e.index <= n;
        if constexpr (std::is_same_v<T, event::StepAdded>) return review && e.position >= 1 && e.position <= n + 1;
        if constexpr (std::is_same_v<T, event::StepRemoved>) return review && e.index >= 1 && e.index <= n && n > 1;
        if constexpr (std::is_same_v<T, event::FinalAnswerEdited>) return review;
        if constexpr (std::is_same_v<T, event::Accepted>) return review && (m.exempt || n >= 3);
        return review;
      },
      k);
}

void model_step(Model& m, const EventKind& k) {
  if (auto* g = std::get_if<event::Generated>(&k)) {
    m.steps = g->chain.steps.size();
    m.state = VerificationState::InReview;
  } else if (std::holds_alternative<event::StepAdded>(k)) {
    ++m.steps;
  } else if (std::holds_alternative<event::StepRemoved>(k)) {
    --m.steps;
  } else if (std::holds_alternative<event::Accepted>(k)) {
    m.state = VerificationState::Accepted;
  } else if (std::holds_alternative<event::Rejected>(k)) {
    m.state = VerificationState::Rejected;
  }
}

ReasoningChain chain(std::size_t n) {
  std::vector<std::string> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back("s" + std::to_string(i));
  return ReasoningChain::from_texts(t, "A");
}

void curation_state_machine() {
  std::mt19937 rng(99);
  const auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  for (int seq = 0; seq < 10000; ++seq) {
    CurationStore store;
    Model model;
    auto s = make_sample("x", 0);
    s.ground_truth = {};
    s.verification_state = VerificationState::Pending;
    s.min_step_exempt = model.exempt = pick(0, 3) == 0;
    store.add_seed(s);
    const int length = pick(1, 12);
    for (int i = 0; i < length; ++i) {
      EventKind k;
      switch (pick(0, 7)) {
        case 0: k = event::Generated{chain(static_cast<std::size_t>(pick(1, 5)))}; break;
        case 1: k = event::EditedStep{pick(0, 6), "e"}; break;
        case 2: k = event::StepAdded{pick(0, 7), "n"}; break;
        case 3: k = event::StepRemoved{pick(0, 6)}; break;
        case 4: k = event::FinalAnswerEdited{"B"}; break;
        case 5:
        case 6: k = event::Accepted{}; break;
        default: k = event::Rejected{"r"}; break;
      }
      if (i == 0 && pick(0, 4) != 0) k = event::Generated{chain(static_cast<std::size_t>(pick(1, 5)))};
      const bool legal = model_legal(model, k);
      const auto before = *store.sample("x");
      const auto logged = store.events().size();
      bool applied = true;
      try {
        store.apply_event({"x", k, "rev", 1});
      } catch (const CurationError&) {
        applied = false;
      }
      expect(applied == legal, "legality of " + std::string(kind_name(k)));
      if (legal) {
        model_step(model, k);
      } else {
        expect(*store.sample("x") == before && store.events().size() == logged, "rejected event has no effect");
      }
      expect(store.sample("x")->verification_state == model.state, "state");
      expect(store.sample("x")->ground_truth.steps.size() == model.steps, "step count");
    }
    const auto replayed = CurationStore::replay(store.seeds(), store.events());
    expect(replayed.at("x") == *store.sample("x"), "replay bit-exact");
    if (model.state == VerificationState::Accepted) expect(validate_sample(*store.sample("x")).ok(), "accepted valid");
  }

  CurationStore store;
  for (const char* id : {"a", "b", "c", "d"}) {
    auto s = make_sample(id, 0);
    s.ground_truth = {};
    s.verification_state = VerificationState::Pending;
    store.add_seed(s);
    store.apply_event({id, event::Generated{chain(3)}, "gen", 1});
  }
  store.apply_event({"c", event::EditedStep{1, "fixed"}, "rev", 1});
  for (const char* id : {"a", "b", "c", "d"}) store.apply_event({id, event::Accepted{}, "rev", 1});
  expect(store.stats().fraction_with_any_edit == 0.25, "stats fraction 0.25");
}

// ---- resume safety ----

struct Crash {};

void resume_safety() {
  EvalFixture fx(12);
  std::vector<SampleResult> reference;
  {
    Gateway g(std::make_shared<VirtualClock>());
    fx.wire(g);
    reference = run_evaluation(g, fx.config("uninterrupted", 3)).results;
  }
  for (std::size_t k : {1u, 5u, 11u}) {
    const auto id = "killed-" + std::to_string(k);
    {
      Gateway g(std::make_shared<VirtualClock>());
      fx.wire(g);
      std::size_t seen = 0;
      RunHooks hooks{[&](const SampleResult&) {
        if (++seen == k) throw Crash{};
      }};
      bool crashed = false;
      try {
        run_evaluation(g, fx.config(id, 1), hooks);
      } catch (const Crash&) {
        crashed = true;
      }
      expect(crashed, "run was interrupted");
    }
    Gateway g(std::make_shared<VirtualClock>());
    const auto mocks = fx.wire(g);
    const auto resumed = run_evaluation(g, fx.config(id, 3));
    expect(resumed.processed == fx.size() - k, "only remaining samples processed");
    std::size_t regenerated = 0;
    for (const auto& h : mocks.generation) regenerated += h->consumed();
    expect(regenerated == fx.size() - k, "completed samples not re-queried");
    expect(resumed.results == reference, "results identical to uninterrupted run");
  }
}

// ---- SFT export ----

void sft_export() {
  Dataset d;
  d.samples = {fixtures::middle_income_sample()};
  std::vector<SftConversation> out;
  export_sft(d, StagePromptSet::defaults(), [&](const SftConversation& c) { out.push_back(c); });
  expect(out.size() == 1, "one conversation");
  const auto& turns = out[0].turns;
  expect(turns.size() == 8, "eight turns");
  for (std::size_t i = 0; i < turns.size(); ++i) {
    expect(turns[i].role == (i % 2 == 0 ? Role::Human : Role::Assistant), "alternating roles");
  }
  expect(turns.back().text == "0.61", "final assistant turn");
  expect(turns.front().image.has_value(), "image on first turn");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void()>>> criteria = {
      {"scorecard-oracle", scorecard_oracle},
      {"overall-mean-property", overall_mean_property},
      {"min-steps-filter", min_steps_filter},
      {"call-accounting", call_accounting},
      {"selection-properties", selection},
      {"aggregation-determinism", aggregation_determinism},
      {"prompt-fidelity", prompt_fidelity},
      {"curation-state-machine", curation_state_machine},
      {"resume-safety", resume_safety},
      {"sft-export", sft_export},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    try {
      fn();
      std::cout << "PASS " << name << '\n';
    } catch (const Failure& f) {
      std::cout << "FAIL " << name << ": " << f.what << '\n';
      ++failed;
    } catch (const std::exception& e) {
      std::cout << "FAIL " << name << ": " << e.what() << '\n';
      ++failed;
    }
  }
  return failed == 0 ? 0 : 1;
}
