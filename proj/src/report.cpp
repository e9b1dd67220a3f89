#include "cotbench/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "cotbench/json_codec.hpp"

namespace cotbench {

namespace {

constexpr std::string_view kFooter =
    "Step Score % is 10 x the mean judge overall score, mapping the 1-10 rubric onto 0-100. "
    "Failed samples are excluded from the means and counted under Failed.";

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string cell(const std::optional<double>& v, std::string_view missing) {
  return v ? fixed2(*v) : std::string(missing);
}

std::string row_label(const ReportRow& row) {
  return row.category ? std::string(display_name(*row.category)) : "Overall";
}

std::vector<const ReportRow*> all_rows(const AggregateReport& r) {
  std::vector<const ReportRow*> rows;
  for (const auto& row : r.categories) rows.push_back(&row);
  if (r.overall) rows.push_back(&*r.overall);
  return rows;
}

std::vector<std::string> header_cells() {
  std::vector<std::string> h = {"Category", "Final Answer %", "Step Score %", "Scored", "Failed"};
  for (MetricName m : kAllMetrics) h.emplace_back(to_string(m));
  return h;
}

std::vector<std::string> row_cells(const ReportRow& row, std::string_view missing) {
  std::vector<std::string> c = {row_label(row), cell(row.final_answer_pct, missing),
                                cell(row.step_score_pct, missing), std::to_string(row.scored),
                                std::to_string(row.failed)};
  for (const auto& m : row.metric_means) c.push_back(cell(m, missing));
  return c;
}

std::string render_markdown(const AggregateReport& r) {
  std::ostringstream out;
  const auto line = [&out](const std::vector<std::string>& cells) {
    out << '|';
    for (const auto& c : cells) out << ' ' << c << " |";
    out << '\n';
  };
  const auto header = header_cells();
  line(header);
  out << '|';
  for (std::size_t i = 0; i < header.size(); ++i) out << (i == 0 ? " --- |" : " ---: |");
  out << '\n';
  for (const auto* row : all_rows(r)) line(row_cells(*row, "-"));
  out << '\n' << kFooter << '\n';
  return out.str();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string render_csv(const AggregateReport& r) {
  std::ostringstream out;
  const auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_escape(cells[i]);
    out << '\n';
  };
  line(header_cells());
  for (const auto* row : all_rows(r)) line(row_cells(*row, ""));
  return out.str();
}

std::string json_string(std::string_view s) { return Json(std::string(s)).dump(); }

std::string json_real(const std::optional<double>& v) { return v ? fixed2(*v) : "null"; }

void render_json_row(std::ostringstream& out, const ReportRow& row, const std::string& indent) {
  const std::string in = indent + "  ";
  out << "{\n";
  out << in << "\"category\": "
      << (row.category ? json_string(to_string(*row.category)) : std::string("null")) << ",\n";
  out << in << "\"label\": " << json_string(row_label(row)) << ",\n";
  out << in << "\"final_answer_pct\": " << json_real(row.final_answer_pct) << ",\n";
  out << in << "\"step_score_pct\": " << json_real(row.step_score_pct) << ",\n";
  out << in << "\"scored\": " << row.scored << ",\n";
  out << in << "\"failed\": " << row.failed << ",\n";
  out << in << "\"metric_means\": {\n";
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    out << in << "  " << json_string(to_string(kAllMetrics[i])) << ": "
        << json_real(row.metric_means[i]) << (i + 1 < kMetricCount ? ",\n" : "\n");
  }
  out << in << "}\n" << indent << "}";
}

std::string render_json(const AggregateReport& r) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"dataset\": " << json_string(r.dataset) << ",\n";
  out << "  \"dataset_version\": " << json_string(r.dataset_version) << ",\n";
  out << "  \"categories\": [";
  for (std::size_t i = 0; i < r.categories.size(); ++i) {
    out << (i ? ",\n    " : "\n    ");
    render_json_row(out, r.categories[i], "    ");
  }
  out << (r.categories.empty() ? "],\n" : "\n  ],\n");
  out << "  \"overall\": ";
  if (r.overall) {
    render_json_row(out, *r.overall, "  ");
  } else {
    out << "null";
  }
  out << ",\n  \"note\": " << json_string(kFooter) << "\n}\n";
  return out.str();
}

std::optional<double> opt_real(const Json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) throw ReportParseError(std::string("'") + key + "' is not a number");
  return v.get<double>();
}

ReportRow parse_row(const Json& j) {
  ReportRow row;
  const auto& cat = j.at("category");
  if (!cat.is_null()) {
    row.category = parse_category(cat.get<std::string>());
    if (!row.category) throw ReportParseError("unknown category " + cat.dump());
  }
  row.final_answer_pct = opt_real(j, "final_answer_pct");
  row.step_score_pct = opt_real(j, "step_score_pct");
  row.scored = j.at("scored").get<std::size_t>();
  row.failed = j.at("failed").get<std::size_t>();
  const auto& means = j.at("metric_means");
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    row.metric_means[i] = opt_real(means, std::string(to_string(kAllMetrics[i])).c_str());
  }
  return row;
}

}  // namespace

double round2(double v) { return std::stod(fixed2(v)); }

std::string_view to_string(ReportFormat f) {
  switch (f) {
    case ReportFormat::Markdown: return "md";
    case ReportFormat::Csv: return "csv";
    case ReportFormat::Json: return "json";
  }
  return "md";
}

std::optional<ReportFormat> parse_report_format(std::string_view s) {
  if (s == "md" || s == "markdown") return ReportFormat::Markdown;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  return std::nullopt;
}

std::string render_report(const AggregateReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Markdown: return render_markdown(report);
    case ReportFormat::Csv: return render_csv(report);
    case ReportFormat::Json: return render_json(report);
  }
  return {};
}

AggregateReport parse_report_json(std::string_view text) {
  try {
    const auto j = Json::parse(text);
    AggregateReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.dataset_version = j.at("dataset_version").get<std::string>();
    for (const auto& row : j.at("categories")) r.categories.push_back(parse_row(row));
    if (!j.at("overall").is_null()) r.overall = parse_row(j.at("overall"));
    return r;
  } catch (const Json::exception& e) {
    throw ReportParseError(std::string("malformed report: ") + e.what());
  }
}

}  // namespace cotbench
