#include "cotbench/curation.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <set>
#include <thread>

#include "cotbench/assets.hpp"
#include "cotbench/beam.hpp"
#include "cotbench/util.hpp"

namespace cotbench {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string strip_markup(std::string_view line) {
  std::string s = trim(line);
  while (!s.empty() && (s.front() == '*' || s.front() == '#' || s.front() == '-' ||
                        s.front() == '>' || s.front() == '_')) {
    s.erase(0, 1);
  }
  return trim(s);
}

// Text following a label terminator (':' or '.'), with emphasis markers removed.
std::string after_terminator(std::string_view rest) {
  std::size_t i = 0;
  while (i < rest.size() && (rest[i] == ' ' || rest[i] == '*')) ++i;
  if (i < rest.size() && (rest[i] == ':' || rest[i] == '.')) ++i;
  std::string out = trim(rest.substr(i));
  while (!out.empty() && out.front() == '*') out.erase(0, 1);
  return trim(out);
}

struct Labeled {
  int number = 0;
  std::string text;
};

// Matches "<label> <n>:" case-insensitively.
std::optional<Labeled> match_numbered(const std::string& line, std::string_view label) {
  const auto l = lower(line);
  if (l.rfind(label, 0) != 0) return std::nullopt;
  std::size_t i = label.size();
  while (i < line.size() && line[i] == ' ') ++i;
  const std::size_t digits_start = i;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == digits_start || i - digits_start > 6) return std::nullopt;
  std::size_t j = i;
  while (j < line.size() && (line[j] == ' ' || line[j] == '*')) ++j;
  if (j >= line.size() || (line[j] != ':' && line[j] != '.')) return std::nullopt;
  return Labeled{std::stoi(line.substr(digits_start, i - digits_start)), after_terminator(line.substr(i))};
}

std::optional<std::string> match_final_answer(const std::string& line) {
  static constexpr std::string_view kLabel = "final answer";
  const auto l = lower(line);
  if (l.rfind(kLabel, 0) != 0) return std::nullopt;
  std::size_t j = kLabel.size();
  while (j < line.size() && (line[j] == ' ' || line[j] == '*')) ++j;
  if (j < line.size() && line[j] != ':') return std::nullopt;
  return after_terminator(line.substr(kLabel.size()));
}

void append_text(std::string& target, const std::string& more) {
  if (more.empty()) return;
  if (!target.empty()) target.push_back(' ');
  target += more;
}

}  // namespace

ReasoningChain parse_generated_chain(std::string_view reply) {
  struct Draft {
    std::string step;
    std::optional<std::string> action;
  };
  std::vector<Draft> drafts;
  std::optional<std::string> final_answer;
  enum class Field { None, Step, Action, Final } field = Field::None;

  for (const auto& raw : split_lines(reply)) {
    const auto line = strip_markup(raw);
    if (line.empty()) continue;
    if (auto fa = match_final_answer(line)) {
      if (final_answer) throw GenerationParseError("more than one 'Final Answer:' line");
      final_answer = *fa;
      field = Field::Final;
      continue;
    }
    if (auto step = match_numbered(line, "step")) {
      if (final_answer) throw GenerationParseError("step after the final answer");
      if (step->number != static_cast<int>(drafts.size()) + 1) {
        throw GenerationParseError("expected Step " + std::to_string(drafts.size() + 1) +
                                   ", found Step " + std::to_string(step->number));
      }
      drafts.push_back({step->text, std::nullopt});
      field = Field::Step;
      continue;
    }
    if (auto action = match_numbered(line, "action")) {
      if (drafts.empty() || action->number != static_cast<int>(drafts.size()) ||
          drafts.back().action) {
        throw GenerationParseError("Action " + std::to_string(action->number) +
                                   " does not follow its Step");
      }
      drafts.back().action = action->text;
      field = Field::Action;
      continue;
    }
    switch (field) {
      case Field::Step: append_text(drafts.back().step, line); break;
      case Field::Action: append_text(*drafts.back().action, line); break;
      case Field::Final:
        if (final_answer->empty()) *final_answer = line;
        break;
      case Field::None: break;
    }
  }

  if (!final_answer) throw GenerationParseError("no 'Final Answer:' line");
  if (final_answer->empty()) throw GenerationParseError("final answer is empty");
  if (drafts.empty()) throw GenerationParseError("no 'Step n:' lines");

  std::vector<std::string> texts;
  for (auto& d : drafts) {
    std::string text = trim(d.step);
    if (d.action) append_text(text, trim(*d.action));
    if (text.empty()) {
      throw GenerationParseError("step " + std::to_string(texts.size() + 1) + " is empty");
    }
    texts.push_back(std::move(text));
  }
  return ReasoningChain::from_texts(texts, *final_answer);
}

ReasoningChain generate_chain(Gateway& gateway, const GenerationTask& task, CallLedger* scope) {
  if (trim(task.question).empty()) throw std::invalid_argument("generation task has no question");
  InferenceQuery q{task.sample_id, task.question, task.choices, task.image};
  ChatRequest req;
  req.system = std::string(assets::reasoning_generation_prompt());
  req.messages.push_back(question_message(q));
  req.max_tokens = 1024;
  req.temperature = 0.0;
  const auto reply = gateway.complete(task.target_endpoint, req, Purpose::Generation, scope);
  return parse_generated_chain(reply.text());
}

std::string_view kind_name(const EventKind& kind) {
  static constexpr std::array<std::string_view, 7> kNames = {
      "Generated", "EditedStep", "StepAdded", "StepRemoved", "FinalAnswerEdited", "Accepted",
      "Rejected"};
  return kNames[kind.index()];
}

bool is_edit(const EventKind& kind) {
  return std::holds_alternative<event::EditedStep>(kind) ||
         std::holds_alternative<event::StepAdded>(kind) ||
         std::holds_alternative<event::StepRemoved>(kind) ||
         std::holds_alternative<event::FinalAnswerEdited>(kind);
}

Json to_json(const VerificationEvent& e) {
  Json j;
  j["sample_id"] = e.sample_id;
  j["kind"] = kind_name(e.kind);
  Json payload = Json::object();
  std::visit(
      [&payload](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, event::Generated>) {
          payload = to_json(k.chain);
        } else if constexpr (std::is_same_v<T, event::EditedStep>) {
          payload["index"] = k.index;
          payload["text"] = k.new_text;
        } else if constexpr (std::is_same_v<T, event::StepAdded>) {
          payload["position"] = k.position;
          payload["text"] = k.text;
        } else if constexpr (std::is_same_v<T, event::StepRemoved>) {
          payload["index"] = k.index;
        } else if constexpr (std::is_same_v<T, event::FinalAnswerEdited>) {
          payload["text"] = k.new_text;
        } else if constexpr (std::is_same_v<T, event::Rejected>) {
          if (!k.reason.empty()) payload["reason"] = k.reason;
        }
      },
      e.kind);
  j["payload"] = std::move(payload);
  j["actor"] = e.actor;
  j["ts"] = e.timestamp_ms;
  return j;
}

VerificationEvent event_from_json(const Json& j) {
  namespace jf = json_field;
  VerificationEvent e;
  e.sample_id = jf::string(j, "sample_id");
  e.actor = jf::string_or(j, "actor", "");
  e.timestamp_ms = j.contains("ts") ? jf::integer(j, "ts") : 0;
  static const Json kEmpty = Json::object();
  const Json& p = j.contains("payload") && !j.at("payload").is_null() ? j.at("payload") : kEmpty;
  const auto kind = jf::string(j, "kind");
  const auto index = [&p](const char* key) { return static_cast<int>(jf::integer(p, key)); };
  if (kind == "Generated") {
    e.kind = event::Generated{chain_from_json(p)};
  } else if (kind == "EditedStep") {
    e.kind = event::EditedStep{index("index"), jf::string(p, "text")};
  } else if (kind == "StepAdded") {
    e.kind = event::StepAdded{index("position"), jf::string(p, "text")};
  } else if (kind == "StepRemoved") {
    e.kind = event::StepRemoved{index("index")};
  } else if (kind == "FinalAnswerEdited") {
    e.kind = event::FinalAnswerEdited{jf::string(p, "text")};
  } else if (kind == "Accepted") {
    e.kind = event::Accepted{};
  } else if (kind == "Rejected") {
    e.kind = event::Rejected{jf::string_or(p, "reason", "")};
  } else {
    throw FormatError("unknown event kind '" + kind + "'");
  }
  return e;
}

std::string_view to_string(CurationError::Kind k) {
  switch (k) {
    case CurationError::Kind::UnknownSample: return "UnknownSample";
    case CurationError::Kind::IllegalTransition: return "IllegalTransition";
    case CurationError::Kind::InvalidEdit: return "InvalidEdit";
    case CurationError::Kind::MinSteps: return "min-steps";
    case CurationError::Kind::Invalid: return "Invalid";
  }
  return "Unknown";
}

namespace {

using CK = CurationError::Kind;

void require_state(const BenchmarkSample& s, VerificationState expected, const EventKind& kind) {
  if (s.verification_state != expected) {
    throw CurationError(CK::IllegalTransition,
                        "IllegalTransition: " + std::string(kind_name(kind)) + " on " +
                            std::string(to_string(s.verification_state)) + " sample '" + s.id +
                            "'");
  }
}

std::string require_text(const std::string& text, const char* what) {
  auto t = trim(text);
  if (t.empty()) throw CurationError(CK::InvalidEdit, std::string("InvalidEdit: empty ") + what);
  return t;
}

}  // namespace

BenchmarkSample apply_to_sample(const BenchmarkSample& sample, const EventKind& kind) {
  BenchmarkSample next = sample;
  auto texts = sample.ground_truth.step_texts();
  const int n = static_cast<int>(texts.size());
  const auto rebuild = [&next](const std::vector<std::string>& t) {
    next.ground_truth = ReasoningChain::from_texts(t, next.ground_truth.final_answer);
  };

  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, event::Generated>) {
          require_state(sample, VerificationState::Pending, kind);
          if (k.chain.steps.empty()) {
            throw CurationError(CK::InvalidEdit, "InvalidEdit: generated chain has no steps");
          }
          std::vector<std::string> gen;
          for (const auto& s : k.chain.steps) gen.push_back(require_text(s.text, "step text"));
          next.ground_truth = ReasoningChain::from_texts(
              gen, require_text(k.chain.final_answer, "final answer"));
          next.verification_state = VerificationState::InReview;
        } else if constexpr (std::is_same_v<T, event::EditedStep>) {
          require_state(sample, VerificationState::InReview, kind);
          if (k.index < 1 || k.index > n) {
            throw CurationError(CK::InvalidEdit, "InvalidEdit: no step " + std::to_string(k.index));
          }
          texts[static_cast<std::size_t>(k.index - 1)] = require_text(k.new_text, "step text");
          rebuild(texts);
        } else if constexpr (std::is_same_v<T, event::StepAdded>) {
          require_state(sample, VerificationState::InReview, kind);
          if (k.position < 1 || k.position > n + 1) {
            throw CurationError(CK::InvalidEdit,
                                "InvalidEdit: cannot insert at position " + std::to_string(k.position));
          }
          texts.insert(texts.begin() + (k.position - 1), require_text(k.text, "step text"));
          rebuild(texts);
        } else if constexpr (std::is_same_v<T, event::StepRemoved>) {
          require_state(sample, VerificationState::InReview, kind);
          if (k.index < 1 || k.index > n) {
            throw CurationError(CK::InvalidEdit, "InvalidEdit: no step " + std::to_string(k.index));
          }
          if (n == 1) throw CurationError(CK::InvalidEdit, "InvalidEdit: cannot remove the only step");
          texts.erase(texts.begin() + (k.index - 1));
          rebuild(texts);
        } else if constexpr (std::is_same_v<T, event::FinalAnswerEdited>) {
          require_state(sample, VerificationState::InReview, kind);
          next.ground_truth.final_answer = require_text(k.new_text, "final answer");
        } else if constexpr (std::is_same_v<T, event::Accepted>) {
          require_state(sample, VerificationState::InReview, kind);
          next.verification_state = VerificationState::Accepted;
          const auto v = validate_sample(next);
          if (v.has("min-steps")) {
            throw CurationError(CK::MinSteps, "min-steps: " + v.summary());
          }
          if (!v.ok()) throw CurationError(CK::Invalid, "Invalid: " + v.summary());
        } else if constexpr (std::is_same_v<T, event::Rejected>) {
          require_state(sample, VerificationState::InReview, kind);
          next.verification_state = VerificationState::Rejected;
        }
      },
      kind);
  return next;
}

Json to_json(const CurationStats& s) {
  Json j;
  j["total"] = s.total;
  j["accepted"] = s.accepted;
  j["rejected"] = s.rejected;
  j["fraction_with_any_edit"] = s.fraction_with_any_edit;
  j["total_steps"] = s.total_steps;
  return j;
}

namespace {

constexpr const char* kSeedsFile = "seeds.jsonl";
constexpr const char* kEventsFile = "events.jsonl";

}  // namespace

CurationStore::CurationStore(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  lock_ = std::make_unique<FileLock>(dir / kEventsFile);
  load(dir);
  dir_ = dir;
}

void CurationStore::load(const std::filesystem::path& dir) {
  const auto seeds_path = dir / kSeedsFile;
  if (std::filesystem::exists(seeds_path)) {
    for (const auto& line : split_lines(read_file(seeds_path))) {
      if (trim(line).empty()) continue;
      add_seed(sample_from_json(Json::parse(line)));
    }
  }
  const auto events_path = dir / kEventsFile;
  if (!std::filesystem::exists(events_path)) return;
  const auto text = read_file(events_path);
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    VerificationEvent e;
    try {
      e = event_from_json(Json::parse(lines[i]));
    } catch (const std::exception&) {
      // A torn final write is dropped; anything else is corruption.
      if (i + 1 == lines.size() && !text.empty() && text.back() != '\n') break;
      throw;
    }
    apply_event(e);
  }
}

void CurationStore::add_seed(BenchmarkSample seed) {
  std::lock_guard lock(mu_);
  if (seeds_.count(seed.id)) {
    throw CurationError(CK::Invalid, "duplicate sample id '" + seed.id + "'");
  }
  if (seed.verification_state != VerificationState::Pending) {
    throw CurationError(CK::Invalid, "seed '" + seed.id + "' must be Pending");
  }
  if (dir_) append_line(*dir_ / kSeedsFile, to_json(seed).dump());
  order_.push_back(seed.id);
  current_[seed.id] = seed;
  seeds_[seed.id] = std::move(seed);
}

BenchmarkSample CurationStore::apply_event(const VerificationEvent& e) {
  std::lock_guard lock(mu_);
  const auto it = current_.find(e.sample_id);
  if (it == current_.end()) {
    throw CurationError(CK::UnknownSample, "unknown sample '" + e.sample_id + "'");
  }
  auto next = apply_to_sample(it->second, e.kind);
  VerificationEvent stored = e;
  if (stored.timestamp_ms == 0) stored.timestamp_ms = unix_millis_now();
  if (dir_) append_line(*dir_ / kEventsFile, to_json(stored).dump());
  events_.push_back(std::move(stored));
  it->second = next;
  return next;
}

std::optional<BenchmarkSample> CurationStore::sample(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = current_.find(id);
  if (it == current_.end()) return std::nullopt;
  return it->second;
}

std::vector<VerificationEvent> CurationStore::history(const std::string& id) const {
  std::lock_guard lock(mu_);
  std::vector<VerificationEvent> out;
  for (const auto& e : events_) {
    if (e.sample_id == id) out.push_back(e);
  }
  return out;
}

std::vector<VerificationEvent> CurationStore::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::vector<std::string> CurationStore::ids() const {
  std::lock_guard lock(mu_);
  return order_;
}

std::vector<BenchmarkSample> CurationStore::samples() const {
  std::lock_guard lock(mu_);
  std::vector<BenchmarkSample> out;
  for (const auto& id : order_) out.push_back(current_.at(id));
  return out;
}

std::vector<BenchmarkSample> CurationStore::seeds() const {
  std::lock_guard lock(mu_);
  std::vector<BenchmarkSample> out;
  for (const auto& id : order_) out.push_back(seeds_.at(id));
  return out;
}

CurationStats CurationStore::stats() const {
  std::lock_guard lock(mu_);
  CurationStats s;
  s.total = order_.size();
  std::set<std::string> edited;
  for (const auto& e : events_) {
    if (is_edit(e.kind)) edited.insert(e.sample_id);
  }
  std::size_t decided_edited = 0;
  for (const auto& id : order_) {
    const auto& sample = current_.at(id);
    const bool accepted = sample.verification_state == VerificationState::Accepted;
    const bool rejected = sample.verification_state == VerificationState::Rejected;
    if (accepted) {
      ++s.accepted;
      s.total_steps += sample.ground_truth.steps.size();
    }
    if (rejected) ++s.rejected;
    if ((accepted || rejected) && edited.count(id)) ++decided_edited;
  }
  const auto decided = s.accepted + s.rejected;
  s.fraction_with_any_edit =
      decided == 0 ? 0.0 : static_cast<double>(decided_edited) / static_cast<double>(decided);
  return s;
}

Dataset CurationStore::accepted_dataset(std::string name) const {
  Dataset d;
  d.name = std::move(name);
  for (auto& s : samples()) {
    if (s.verification_state == VerificationState::Accepted) d.samples.push_back(std::move(s));
  }
  return d;
}

std::map<std::string, BenchmarkSample> CurationStore::replay(
    const std::vector<BenchmarkSample>& seeds, const std::vector<VerificationEvent>& events) {
  std::map<std::string, BenchmarkSample> state;
  for (const auto& s : seeds) state[s.id] = s;
  for (const auto& e : events) {
    auto it = state.find(e.sample_id);
    if (it == state.end()) {
      throw CurationError(CK::UnknownSample, "event for unknown sample '" + e.sample_id + "'");
    }
    it->second = apply_to_sample(it->second, e.kind);
  }
  return state;
}

std::vector<BenchmarkSample> load_seed_questions(const std::filesystem::path& path) {
  namespace jf = json_field;
  std::vector<BenchmarkSample> out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = Json::parse(line);
      BenchmarkSample s;
      s.id = jf::string(j, "id");
      const auto cat = jf::string(j, "category");
      const auto parsed = parse_category(cat);
      if (!parsed) throw FormatError("unknown category '" + cat + "'");
      s.category = *parsed;
      s.question = jf::string(j, "question");
      if (j.contains("choices") && !j["choices"].is_null()) {
        s.choices = j["choices"].get<std::vector<std::string>>();
      }
      s.image = image_from_json(jf::require(j, "image"));
      s.provenance = jf::string_or(j, "provenance", "");
      s.min_step_exempt = j.contains("min_step_exempt") ? jf::boolean(j, "min_step_exempt") : false;
      if (trim(s.question).empty()) throw FormatError("question is empty");
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw DatasetError(DatasetError::Kind::Parse, line_no,
                         "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

GenerationReport run_generation(CurationStore& store, Gateway& gateway,
                                const EndpointConfig& target, std::size_t concurrency,
                                const std::string& actor) {
  std::vector<BenchmarkSample> pending;
  for (auto& s : store.samples()) {
    if (s.verification_state == VerificationState::Pending) pending.push_back(std::move(s));
  }
  GenerationReport report;
  std::mutex report_mu;
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const auto& s = pending[i];
      try {
        GenerationTask task{s.id, s.question, s.choices, s.image, target};
        auto chain = generate_chain(gateway, task);
        store.apply_event({s.id, event::Generated{std::move(chain)}, actor, 0});
        std::lock_guard lock(report_mu);
        ++report.generated;
      } catch (const std::exception& e) {
        std::lock_guard lock(report_mu);
        report.failures.emplace_back(s.id, e.what());
      }
    }
  };
  const auto n = std::max<std::size_t>(1, std::min(concurrency, pending.size()));
  std::vector<std::jthread> threads;
  for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
  threads.clear();
  std::sort(report.failures.begin(), report.failures.end());
  return report;
}

LeaseManager::LeaseManager(std::shared_ptr<Clock> clock, std::chrono::seconds ttl)
    : clock_(std::move(clock)), ttl_(ttl) {}

std::optional<ReviewLease> LeaseManager::acquire(const std::string& sample_id,
                                                 const std::string& reviewer) {
  std::lock_guard lock(mu_);
  const auto now = clock_->now();
  auto it = leases_.find(sample_id);
  if (it != leases_.end() && it->second.expires_at > now && it->second.reviewer != reviewer) {
    return std::nullopt;
  }
  ReviewLease lease{sample_id, reviewer, now + ttl_};
  leases_[sample_id] = lease;
  return lease;
}

bool LeaseManager::holds(const std::string& sample_id, const std::string& reviewer) const {
  std::lock_guard lock(mu_);
  const auto it = leases_.find(sample_id);
  return it != leases_.end() && it->second.reviewer == reviewer &&
         it->second.expires_at > clock_->now();
}

bool LeaseManager::is_leased(const std::string& sample_id) const {
  std::lock_guard lock(mu_);
  const auto it = leases_.find(sample_id);
  return it != leases_.end() && it->second.expires_at > clock_->now();
}

void LeaseManager::release(const std::string& sample_id) {
  std::lock_guard lock(mu_);
  leases_.erase(sample_id);
}

}  // namespace cotbench
