#include "cotbench/beam.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <future>
#include <map>

#include "cotbench/assets.hpp"

namespace cotbench {

std::string_view to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::Auto: return "auto";
    case SelectionStrategy::LogProb: return "logprob";
    case SelectionStrategy::JudgeRank: return "judge-rank";
    case SelectionStrategy::MajorityAnswer: return "majority";
  }
  return "auto";
}

std::optional<SelectionStrategy> parse_strategy(std::string_view s) {
  for (auto v : {SelectionStrategy::Auto, SelectionStrategy::LogProb, SelectionStrategy::JudgeRank,
                 SelectionStrategy::MajorityAnswer}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

void BeamConfig::validate() const {
  if (num_beams < 1) throw std::invalid_argument("num_beams must be >= 1");
  if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  stage_prompts.validate();
}

std::string normalize_answer(std::string_view answer) {
  std::string s = trim(answer);
  while (!s.empty() && (s.front() == '*' || s.front() == '"' || s.front() == '\'')) s.erase(0, 1);
  while (!s.empty() && (s.back() == '*' || s.back() == '.' || s.back() == '"' || s.back() == '\'')) {
    s.pop_back();
  }
  s = trim(s);
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string extract_final_answer(std::string_view response) {
  const auto lines = [&] {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= response.size()) {
      const auto end = response.find('\n', start);
      out.emplace_back(response.substr(start, end == std::string_view::npos ? std::string_view::npos
                                                                              : end - start));
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
    return out;
  }();
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    std::string lower = *it;
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto pos = lower.find("final answer");
    if (pos == std::string::npos) continue;
    auto rest = it->substr(pos + 12);
    const auto colon = rest.find(':');
    if (colon != std::string::npos) rest = rest.substr(colon + 1);
    auto answer = trim(rest);
    while (!answer.empty() && answer.front() == '*') answer.erase(0, 1);
    answer = trim(answer);
    if (!answer.empty()) return answer;
  }
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    auto t = trim(*it);
    if (!t.empty()) return t;
  }
  return {};
}

namespace {

bool all_have_logprobs(const std::vector<Candidate>& candidates) {
  return std::all_of(candidates.begin(), candidates.end(), [](const Candidate& c) {
    return c.logprob_sum && c.token_count && *c.token_count > 0;
  });
}

Selection select_logprob(const std::vector<Candidate>& candidates) {
  if (!all_have_logprobs(candidates)) {
    throw StrategyError(
        "LogProb selection needs logprob sums and token counts for every candidate; "
        "use judge-rank or majority with this endpoint");
  }
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double score = *candidates[i].logprob_sum / *candidates[i].token_count;
    if (i == 0 || score > best_score) {
      best = i;
      best_score = score;
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", best_score);
  return {best, "highest mean token logprob (" + std::string(buf) + ")",
          SelectionStrategy::LogProb};
}

Selection select_majority(const std::vector<Candidate>& candidates) {
  std::vector<std::string> answers;
  answers.reserve(candidates.size());
  std::map<std::string, std::size_t> votes;
  for (const auto& c : candidates) {
    answers.push_back(normalize_answer(extract_final_answer(c.text)));
    ++votes[answers.back()];
  }
  std::size_t best = 0;
  std::size_t best_votes = 0;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    const auto v = votes[answers[i]];
    if (v > best_votes) {
      best = i;
      best_votes = v;
    }
  }
  return {best,
          "plurality answer '" + answers[best] + "' with " + std::to_string(best_votes) + "/" +
              std::to_string(candidates.size()) + " votes",
          SelectionStrategy::MajorityAnswer};
}

std::optional<std::size_t> parse_choice_number(std::string_view reply, std::size_t max) {
  auto t = trim(reply);
  if (!t.empty() && t.back() == '.') t.pop_back();
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || value < 1 || value > max) {
    return std::nullopt;
  }
  return value;
}

Selection select_judge_rank(const std::vector<Candidate>& candidates,
                            const SelectionContext& context) {
  if (!context.gateway || !context.judge) {
    throw StrategyError("judge-rank selection needs a judge endpoint");
  }
  std::string listing;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i) listing += "\n\n";
    listing += "Candidate " + std::to_string(i + 1) + ":\n" + candidates[i].text;
  }
  ChatRequest req;
  req.messages.push_back(ChatMessage::user_text(assets::fill(
      assets::judge_rank_template(), {{"question", context.question}, {"candidates", listing}})));
  req.max_tokens = 10;
  req.temperature = 0.0;
  const auto reply =
      context.gateway->complete(*context.judge, req, Purpose::Judge, context.scope).text();
  const auto pick = parse_choice_number(reply, candidates.size());
  if (!pick) throw StrategyError("judge-rank reply is not a candidate number: '" + reply + "'");
  return {*pick - 1, "judge ranked candidate " + std::to_string(*pick) + " best",
          SelectionStrategy::JudgeRank};
}

}  // namespace

Selection select_best(const std::vector<Candidate>& candidates, SelectionStrategy strategy,
                      const SelectionContext& context) {
  if (candidates.empty()) throw StrategyError("no candidates to select from");
  if (candidates.size() == 1) {
    return {0, "single candidate", strategy};
  }
  if (strategy == SelectionStrategy::Auto) {
    if (all_have_logprobs(candidates)) {
      strategy = SelectionStrategy::LogProb;
    } else if (context.multiple_choice || !context.judge) {
      strategy = SelectionStrategy::MajorityAnswer;
    } else {
      strategy = SelectionStrategy::JudgeRank;
    }
  }
  switch (strategy) {
    case SelectionStrategy::LogProb: return select_logprob(candidates);
    case SelectionStrategy::MajorityAnswer: return select_majority(candidates);
    case SelectionStrategy::JudgeRank: return select_judge_rank(candidates, context);
    case SelectionStrategy::Auto: break;
  }
  throw StrategyError("unresolved selection strategy");
}

ChatMessage question_message(const InferenceQuery& query, const std::string& suffix) {
  ChatMessage msg;
  msg.role = "user";
  if (query.image) msg.parts.push_back(ContentPart::of_image(*query.image));
  auto text = format_question(query.question, query.choices);
  if (!suffix.empty()) text += " " + suffix;
  msg.parts.push_back(ContentPart::of_text(std::move(text)));
  return msg;
}

namespace {

bool is_multiple_choice(const InferenceQuery& q) { return q.choices && !q.choices->empty(); }

ChatResponse generate(Gateway& gateway, const EndpointConfig& target, ChatRequest request,
                      CallLedger& scope) {
  try {
    return gateway.complete(target, request, Purpose::Generation, &scope);
  } catch (const GatewayError& e) {
    throw InferenceError(std::string("all candidates failed: ") + e.what());
  }
}

}  // namespace

CandidateSet beam_generate(Gateway& gateway, const BeamEndpoints& endpoints,
                           const InferenceQuery& query, const BeamConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  CallLedger scope;

  ChatRequest request;
  request.system = config.system_prompt;
  request.messages.push_back(question_message(query));
  request.n = config.num_beams;
  request.temperature = config.temperature;
  request.max_tokens = config.max_tokens;
  request.logprobs = config.strategy == SelectionStrategy::LogProb ||
                     config.strategy == SelectionStrategy::Auto;

  auto response = generate(gateway, endpoints.target, request, scope);

  SelectionContext ctx;
  ctx.gateway = &gateway;
  ctx.judge = endpoints.judge ? &*endpoints.judge : nullptr;
  ctx.question = format_question(query.question, query.choices);
  ctx.multiple_choice = is_multiple_choice(query);
  ctx.scope = &scope;
  const auto selection = select_best(response.candidates, config.strategy, ctx);

  CandidateSet set;
  set.candidates = std::move(response.candidates);
  set.selected_index = selection.index;
  set.selection_reason = selection.reason;
  set.strategy = selection.strategy;
  set.failed_candidates = response.failed_samples;
  set.ledger_delta = scope.counts();
  set.wall_time = std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - started);
  return set;
}

namespace {

std::size_t compare_pair(Gateway& gateway, const EndpointConfig& judge, Stage stage,
                         const std::string& question, const std::vector<Candidate>& cands,
                         std::size_t a, std::size_t b, CallLedger& scope) {
  ChatRequest req;
  req.messages.push_back(ChatMessage::user_text(
      assets::fill(assets::stage_compare_template(), {{"stage", to_string(stage)},
                                                      {"question", question},
                                                      {"first", cands[a].text},
                                                      {"second", cands[b].text}})));
  req.max_tokens = 10;
  req.temperature = 0.0;
  const auto reply = gateway.complete(judge, req, Purpose::Judge, &scope).text();
  const auto pick = parse_choice_number(reply, 2);
  if (!pick) throw StrategyError("stage comparison reply is not 1 or 2: '" + reply + "'");
  return *pick == 1 ? a : b;
}

// Single-elimination bracket; an odd contender gets a bye. B-1 comparisons.
std::size_t knockout(Gateway& gateway, const EndpointConfig* judge, Stage stage,
                     const std::string& question, const std::vector<Candidate>& cands,
                     CallLedger& scope) {
  std::vector<std::size_t> alive(cands.size());
  for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;
  if (alive.size() > 1 && !judge) throw StrategyError("stage-level search needs a judge endpoint");
  while (alive.size() > 1) {
    std::vector<std::future<std::size_t>> round;
    for (std::size_t i = 0; i + 1 < alive.size(); i += 2) {
      round.push_back(std::async(std::launch::async, [&, a = alive[i], b = alive[i + 1]] {
        return compare_pair(gateway, *judge, stage, question, cands, a, b, scope);
      }));
    }
    std::vector<std::size_t> next;
    for (auto& f : round) next.push_back(f.get());
    if (alive.size() % 2 == 1) next.push_back(alive.back());
    alive = std::move(next);
  }
  return alive.front();
}

}  // namespace

CandidateSet stage_level_generate(Gateway& gateway, const BeamEndpoints& endpoints,
                                  const InferenceQuery& query, const BeamConfig& config) {
  config.validate();
  if (config.num_beams > 1 && !endpoints.judge) {
    throw StrategyError("stage-level search with B > 1 needs a judge endpoint");
  }
  const auto started = std::chrono::steady_clock::now();
  CallLedger scope;
  const auto question = format_question(query.question, query.choices);
  const EndpointConfig* judge = endpoints.judge ? &*endpoints.judge : nullptr;

  std::vector<ChatMessage> history;
  std::vector<std::string> winners;
  std::vector<Candidate> last_stage;
  std::size_t last_winner = 0;
  std::size_t failed = 0;
  for (Stage stage : kAllStages) {
    if (stage == Stage::Summary) {
      history.push_back(question_message(query, config.stage_prompts.prompt(stage)));
    } else {
      history.push_back(ChatMessage::user_text(config.stage_prompts.prompt(stage)));
    }
    ChatRequest request;
    request.system = config.system_prompt;
    request.messages = history;
    request.n = config.num_beams;
    request.temperature = config.temperature;
    request.max_tokens = config.max_tokens;
    auto response = generate(gateway, endpoints.target, request, scope);
    failed += response.failed_samples;

    const auto winner = knockout(gateway, judge, stage, question, response.candidates, scope);
    winners.push_back(response.candidates[winner].text);
    history.push_back(ChatMessage::assistant_text(winners.back()));
    last_stage = std::move(response.candidates);
    last_winner = winner;
  }

  std::string prefix;
  for (std::size_t i = 0; i + 1 < winners.size(); ++i) prefix += winners[i] + "\n\n";

  CandidateSet set;
  for (const auto& c : last_stage) {
    Candidate composed = c;
    composed.text = prefix + c.text;
    set.candidates.push_back(std::move(composed));
  }
  set.selected_index = last_winner;
  set.selection_reason = "stage-level knockout over " + std::to_string(kAllStages.size()) +
                         " stages";
  set.strategy = config.strategy;
  set.failed_candidates = failed;
  set.ledger_delta = scope.counts();
  set.wall_time = std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - started);
  return set;
}

Json trace_json(const InferenceQuery& query, std::string_view mode, const BeamConfig& config,
                const CandidateSet& set) {
  Json j;
  j["question_id"] = query.id;
  j["mode"] = mode;
  j["B"] = config.num_beams;
  j["strategy"] = to_string(set.strategy);
  Json cands = Json::array();
  for (const auto& c : set.candidates) {
    Json cj;
    cj["text"] = c.text;
    cj["logprob_sum"] = c.logprob_sum ? Json(*c.logprob_sum) : Json(nullptr);
    cj["token_count"] = c.token_count ? Json(*c.token_count) : Json(nullptr);
    cands.push_back(std::move(cj));
  }
  j["candidates"] = std::move(cands);
  j["selected_index"] = set.selected_index;
  j["selection_reason"] = set.selection_reason;
  j["failed_candidates"] = set.failed_candidates;
  j["ledger_delta"] = to_json(set.ledger_delta);
  j["wall_time"] = set.wall_time.count();
  return j;
}

}  // namespace cotbench
