#pragma once

// Aggregate benchmark results and their Markdown / CSV / JSON renderings.

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cotbench/core.hpp"

namespace cotbench {

struct ReportRow {
  /// nullopt for the Overall row.
  std::optional<Category> category;
  /// nullopt when no sample in the row was scored.
  std::optional<double> final_answer_pct;
  std::optional<double> step_score_pct;
  std::size_t scored = 0;
  std::size_t failed = 0;
  std::array<std::optional<double>, kMetricCount> metric_means{};

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct AggregateReport {
  std::string dataset;
  std::string dataset_version;
  /// Categories that have at least one sample, in Category order.
  std::vector<ReportRow> categories;
  /// Absent for an empty result set.
  std::optional<ReportRow> overall;

  friend bool operator==(const AggregateReport&, const AggregateReport&) = default;
};

enum class ReportFormat { Markdown, Csv, Json };

std::string_view to_string(ReportFormat f);
/// "md"/"markdown", "csv", "json".
std::optional<ReportFormat> parse_report_format(std::string_view s);

/// Every real is printed with exactly two decimals. Pure.
std::string render_report(const AggregateReport& report, ReportFormat format);

class ReportParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inverse of the Json rendering (values come back at two-decimal precision).
AggregateReport parse_report_json(std::string_view text);

/// Rounds to the two-decimal value the renderers print.
double round2(double v);

}  // namespace cotbench
