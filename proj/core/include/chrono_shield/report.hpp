#pragma once

#include <string>
#include <string_view>

#include "chrono_shield/experiment.hpp"

namespace chrono_shield {

enum class ReportFormat { text, csv, json };

// "text" / "table", "csv", "json". Throws InvalidArgument.
ReportFormat parse_report_format(std::string_view name);

// Probability as a percentage with two decimals: 0.97314 -> "97.31".
std::string format_percent(double probability);

// Rows are emitted in image-id order. Column and field meanings are listed in
// docs/report_formats.md.
std::string emit_report(const ExperimentReport& report, ReportFormat format);

// Inverse of the json form. Throws MalformedFile.
ExperimentReport parse_report_json(std::string_view text);

}  // namespace chrono_shield
