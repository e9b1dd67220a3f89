#include "cotbench/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "cotbench/beam.hpp"
#include "cotbench/curation.hpp"
#include "cotbench/dataset.hpp"
#include "cotbench/eval_runner.hpp"
#include "cotbench/json_codec.hpp"
#include "cotbench/mock_backend.hpp"
#include "cotbench/report.hpp"
#include "cotbench/review_api.hpp"
#include "cotbench/util.hpp"

namespace cotbench {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loads an endpoint file and wires its mock script, if any, into the gateway.
EndpointConfig load_endpoint(Gateway& gateway, const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError("endpoint file " + path + ": " + e.what());
  }
  auto endpoint = endpoint_from_json(j);
  if (j.contains("mock_script")) {
    fs::path script = j.at("mock_script").get<std::string>();
    if (script.is_relative()) script = fs::path(path).parent_path() / script;
    gateway.register_backend(endpoint.base_url, load_mock_script(script));
  }
  return endpoint;
}

Json redacted(Json j) {
  if (j.is_object()) {
    for (auto& [key, value] : j.items()) {
      if (key == "api_key_env" && value.is_string() && !value.get<std::string>().empty()) {
        value = "[REDACTED]";
      } else {
        value = redacted(value);
      }
    }
  }
  return j;
}

std::optional<BeamConfig> beam_from_flags(int beams, const std::string& strategy) {
  if (beams <= 0) return std::nullopt;
  BeamConfig b;
  b.num_beams = beams;
  const auto s = parse_strategy(strategy);
  if (!s) throw UsageError("unknown --strategy '" + strategy + "'");
  b.strategy = *s;
  b.validate();
  return b;
}

ImageRef image_from_arg(const std::string& arg) {
  if (arg.rfind("http://", 0) == 0 || arg.rfind("https://", 0) == 0) {
    return {ImageKind::Url, arg, ""};
  }
  std::string ext = fs::path(arg).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  static const std::map<std::string, std::string> kTypes = {
      {".png", "image/png"}, {".jpg", "image/jpeg"}, {".jpeg", "image/jpeg"},
      {".gif", "image/gif"}, {".webp", "image/webp"}};
  const auto it = kTypes.find(ext);
  if (it == kTypes.end()) throw UsageError("cannot tell the image type of " + arg);
  if (!fs::exists(arg)) throw std::runtime_error("image " + arg + " not found");
  return {ImageKind::FilePath, arg, it->second};
}

struct Options {
  std::string log_path;
  std::string runs_root = "runs";

  // generate
  std::string questions, store_dir, target, judge;
  std::size_t concurrency = 4;
  // review serve
  std::string host = "127.0.0.1";
  int port = 8080;
  // eval
  std::string dataset, run_id;
  int beams = 0;
  std::string strategy = "auto";
  // infer
  std::string question, image, mode = "beam", trace;
  std::vector<std::string> choices;
  // report
  std::string run, format = "md";
  // export-sft
  std::string out_path;
};

int cmd_generate(const Options& o, std::ostream& out) {
  Gateway gateway;
  if (!o.log_path.empty()) gateway.set_log(o.log_path);
  const auto target = load_endpoint(gateway, o.target);
  gateway.check_endpoint(target);
  CurationStore store(o.store_dir);
  std::size_t added = 0;
  const auto existing = store.ids();
  for (auto& seed : load_seed_questions(o.questions)) {
    if (std::find(existing.begin(), existing.end(), seed.id) != existing.end()) continue;
    store.add_seed(std::move(seed));
    ++added;
  }
  const auto report = run_generation(store, gateway, target, o.concurrency);
  out << "seeded " << added << ", generated " << report.generated << ", failed "
      << report.failures.size() << '\n';
  for (const auto& [id, why] : report.failures) out << "  " << id << ": " << why << '\n';
  return kExitOk;
}

int cmd_review_serve(const Options& o, std::ostream& out) {
  CurationStore store(o.store_dir);
  ReviewService service(store);
  ReviewServer server(service);
  out << "review API on http://" << o.host << ':' << o.port << '\n' << std::flush;
  if (!server.listen(o.host, o.port)) {
    throw std::runtime_error("cannot listen on " + o.host + ":" + std::to_string(o.port));
  }
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  Gateway gateway;
  if (!o.log_path.empty()) gateway.set_log(o.log_path);
  RunConfig config;
  config.dataset_path = o.dataset;
  config.target = load_endpoint(gateway, o.target);
  config.judge = load_endpoint(gateway, o.judge);
  config.beam = beam_from_flags(o.beams, o.strategy);
  config.concurrency = o.concurrency;
  config.run_id = o.run_id;
  config.runs_root = o.runs_root;
  err << "run config: " << redacted(to_json(config)).dump() << '\n';
  const auto run = run_evaluation(gateway, config);
  const auto totals = gateway.ledger().counts();
  out << render_report(run.report, ReportFormat::Markdown);
  out << "\nrun " << config.run_id << ": " << run.results.size() << " results ("
      << run.processed << " new), calls: " << totals.generation_calls << " generation, "
      << totals.judge_calls << " judge, " << totals.retried_calls << " retried\n";
  return kExitOk;
}

int cmd_infer(const Options& o, std::ostream& out) {
  if (o.mode != "beam" && o.mode != "stage") throw UsageError("--mode must be beam or stage");
  Gateway gateway;
  if (!o.log_path.empty()) gateway.set_log(o.log_path);
  BeamEndpoints endpoints{load_endpoint(gateway, o.target), std::nullopt};
  if (!o.judge.empty()) endpoints.judge = load_endpoint(gateway, o.judge);
  auto beam = beam_from_flags(std::max(o.beams, 1), o.strategy);
  InferenceQuery query;
  query.id = "cli";
  query.question = o.question;
  if (!o.choices.empty()) query.choices = o.choices;
  if (!o.image.empty()) query.image = image_from_arg(o.image);
  const auto set = o.mode == "beam" ? beam_generate(gateway, endpoints, query, *beam)
                                    : stage_level_generate(gateway, endpoints, query, *beam);
  const auto trace = trace_json(query, o.mode, *beam, set);
  if (!o.trace.empty()) write_file_atomic(o.trace, trace.dump(2) + "\n");
  out << set.selected_text() << '\n';
  out << "selected " << set.selected_index + 1 << " of " << set.candidates.size() << " ("
      << set.selection_reason << "), calls: " << set.ledger_delta.generation_calls
      << " generation, " << set.ledger_delta.judge_calls << " judge\n";
  return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out) {
  const auto fmt = parse_report_format(o.format);
  if (!fmt) throw UsageError("unknown --format '" + o.format + "'");
  const fs::path dir = fs::path(o.runs_root) / o.run;
  const auto report_path = dir / "report.json";
  if (!fs::exists(report_path)) {
    throw std::runtime_error("run '" + o.run + "' has no report under " + dir.string());
  }
  out << render_report(parse_report_json(read_file(report_path)), *fmt);
  return kExitOk;
}

int cmd_export_sft(const Options& o, std::ostream& out) {
  const auto dataset = load_dataset(o.dataset);
  std::string jsonl;
  const auto report = export_sft(dataset, StagePromptSet::defaults(),
                                 [&jsonl](const SftConversation& c) { jsonl += to_json(c).dump() + "\n"; });
  write_file_atomic(o.out_path, jsonl);
  out << "exported " << report.total << " conversations to " << o.out_path << '\n';
  if (!report.synthesized_captions.empty()) {
    out << "caption turn derived from ground-truth steps for " << report.synthesized_captions.size()
        << " samples\n";
  }
  return kExitOk;
}

int cmd_validate(const Options& o, std::ostream& out) {
  const auto dataset = load_dataset(o.dataset);
  out << dataset.name << '@' << dataset.version << ": " << dataset.samples.size()
      << " valid samples\n";
  return kExitOk;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Step-by-step visual reasoning benchmark toolkit", "cotbench"};
  app.set_config("--config", "", "TOML config file; command-line flags override it");
  app.require_subcommand(1);
  Options o;
  app.add_option("--log", o.log_path, "Append per-attempt model call records (JSONL)");

  auto* generate = app.add_subcommand("generate", "Draft reasoning chains for a question file");
  generate->add_option("--questions", o.questions, "Question JSONL")->required();
  generate->add_option("--store", o.store_dir, "Curation store directory")->required();
  generate->add_option("--target", o.target, "Generator endpoint JSON")->required();
  generate->add_option("--concurrency", o.concurrency)->check(CLI::PositiveNumber);

  auto* review = app.add_subcommand("review", "Human verification");
  review->require_subcommand(1);
  auto* serve = review->add_subcommand("serve", "Start the review API");
  serve->add_option("--store", o.store_dir, "Curation store directory")->required();
  serve->add_option("--port", o.port)->check(CLI::Range(1, 65535));
  serve->add_option("--host", o.host);

  auto* eval = app.add_subcommand("eval", "Evaluate a target model on a dataset");
  eval->add_option("--dataset", o.dataset, "Dataset JSONL")->required();
  eval->add_option("--target", o.target, "Target endpoint JSON")->required();
  eval->add_option("--judge", o.judge, "Judge endpoint JSON")->required();
  eval->add_option("--beams", o.beams, "Candidates per question (beam search)")->check(CLI::PositiveNumber);
  eval->add_option("--strategy", o.strategy, "auto | logprob | judge-rank | majority");
  eval->add_option("--concurrency", o.concurrency)->check(CLI::PositiveNumber);
  eval->add_option("--run-id", o.run_id)->required();
  eval->add_option("--runs-root", o.runs_root);

  auto* infer = app.add_subcommand("infer", "Answer one question with beam search");
  infer->add_option("--question", o.question)->required();
  infer->add_option("--choices", o.choices)->delimiter(',');
  infer->add_option("--image", o.image, "Image file or URL");
  infer->add_option("--target", o.target, "Target endpoint JSON")->required();
  infer->add_option("--judge", o.judge, "Judge endpoint JSON");
  infer->add_option("--beams", o.beams)->check(CLI::PositiveNumber);
  infer->add_option("--strategy", o.strategy);
  infer->add_option("--mode", o.mode, "beam | stage");
  infer->add_option("--trace", o.trace, "Write the candidate trace here");

  auto* report = app.add_subcommand("report", "Render a finished run's report");
  report->add_option("--run", o.run)->required();
  report->add_option("--format", o.format, "md | csv | json");
  report->add_option("--runs-root", o.runs_root);

  auto* export_cmd = app.add_subcommand("export-sft", "Export accepted samples as conversations");
  export_cmd->add_option("--dataset", o.dataset)->required();
  export_cmd->add_option("--out", o.out_path)->required();

  auto* validate = app.add_subcommand("validate", "Validate a dataset file");
  validate->add_option("--dataset", o.dataset)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(o, out);
    if (serve->parsed()) return cmd_review_serve(o, out);
    if (eval->parsed()) return cmd_eval(o, out, err);
    if (infer->parsed()) return cmd_infer(o, out);
    if (report->parsed()) return cmd_report(o, out);
    if (export_cmd->parsed()) return cmd_export_sft(o, out);
    if (validate->parsed()) return cmd_validate(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace cotbench
