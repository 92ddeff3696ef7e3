#include "chrono_shield/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "chrono_shield/error.hpp"
#include "chrono_shield/synth.hpp"

namespace chrono_shield {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kCsvHeader =
    "id,true_label,true_name,clean_label,clean_confidence,adv_label,adv_name,adv_confidence,attack_success,"
    "iterations,queries,mask,no_defense,baseline_label,baseline_confidence,adv_training,voted_label,"
    "voted_confidence,our_defense,suspected_attack,voters,warnings,note";

std::string yes_no(bool b) { return b ? "yes" : "no"; }

std::string name_of(int label) {
  return label >= 0 && label < kNumClasses ? std::string(class_name(label)) : std::to_string(label);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string voters_field(const ReportRow& r) {
  std::vector<std::string> parts;
  for (const auto& v : r.voters) {
    parts.push_back(std::to_string(v.label) + ":" + format_percent(v.confidence) + (v.date.empty() ? "" : "@" + v.date));
  }
  return join(parts, "|");
}

std::vector<const ReportRow*> ordered(const ExperimentReport& report) {
  std::vector<const ReportRow*> rows;
  for (const auto& r : report.rows) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow* a, const ReportRow* b) { return a->id < b->id; });
  return rows;
}

std::string aggregates_line(const ReportAggregates& a) {
  std::ostringstream os;
  os << "test_images=" << a.test_images << " clean_correct=" << a.clean_correct
     << " clean_accuracy=" << format_percent(a.clean_accuracy()) << " attacked=" << a.attacked
     << " attack_successes=" << a.attack_successes << " attack_success_rate=" << format_percent(a.attack_success_rate())
     << " defended_correct=" << a.defended_correct
     << " defense_success_rate=" << format_percent(a.defense_success_rate())
     << " baseline_correct=" << a.baseline_correct
     << " baseline_defense_rate=" << format_percent(a.baseline_defense_rate())
     << " history_correct=" << a.history_correct
     << " defended_with_correct_history=" << a.defended_with_correct_history;
  return os.str();
}

std::string emit_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const ReportRow* r : ordered(report)) {
    const std::vector<std::string> cols = {
        csv_field(r->id),
        std::to_string(r->true_label),
        csv_field(name_of(r->true_label)),
        std::to_string(r->clean_label),
        format_percent(r->clean_confidence),
        std::to_string(r->adv_label),
        csv_field(name_of(r->adv_label)),
        format_percent(r->adv_confidence),
        yes_no(r->attack_success),
        std::to_string(r->iterations),
        std::to_string(r->queries),
        r->mask_fallback ? "full-frame" : "generated",
        yes_no(r->no_defense_correct()),
        r->baseline_label ? std::to_string(*r->baseline_label) : "",
        r->baseline_label ? format_percent(r->baseline_confidence) : "",
        r->baseline_label ? yes_no(r->baseline_correct()) : "",
        r->defended ? std::to_string(r->voted_label) : "",
        r->defended ? format_percent(r->voted_confidence) : "",
        r->defended ? yes_no(r->defense_correct()) : "",
        r->defended ? yes_no(r->suspected_attack) : "",
        csv_field(voters_field(*r)),
        csv_field(join(r->warnings, "|")),
        csv_field(r->note),
    };
    os << join(cols, ",") << '\n';
  }
  if (!report.rows.empty()) os << "# " << aggregates_line(report.aggregates()) << '\n';
  return os.str();
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string emit_text(const ExperimentReport& report) {
  const std::vector<std::size_t> widths = {16, 22, 30, 30, 7, 11, 11, 30, 0};
  const std::vector<std::string> header = {"image",      "true label", "clean prediction", "adversarial prediction",
                                           "attack",     "no defense", "adv. train", "time travel", "history votes"};
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out += i + 1 < cells.size() ? pad(cells[i], widths[i]) + " " : cells[i];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  auto labelled = [](int label, double conf) { return name_of(label) + " (" + format_percent(conf) + "%)"; };
  auto mark = [](bool b) { return std::string(b ? "ok" : "x"); };

  std::string out = line(header);
  for (const ReportRow* r : ordered(report)) {
    std::vector<std::string> votes;
    for (std::size_t i = 1; i < r->voters.size(); ++i) {
      votes.push_back(name_of(r->voters[i].label) + " " + format_percent(r->voters[i].confidence) + "%");
    }
    out += line({r->id, name_of(r->true_label), labelled(r->clean_label, r->clean_confidence),
                 labelled(r->adv_label, r->adv_confidence), r->attack_success ? "yes" : "no",
                 mark(r->no_defense_correct()), r->baseline_label ? mark(r->baseline_correct()) : "-",
                 r->defended ? mark(r->defense_correct()) + " " + labelled(r->voted_label, r->voted_confidence) : "-",
                 join(votes, ", ")});
  }
  if (!report.rows.empty()) out += "aggregates: " + aggregates_line(report.aggregates()) + "\n";
  return out;
}

std::string emit_json(const ExperimentReport& report) {
  ojson rows = ojson::array();
  for (const ReportRow* r : ordered(report)) {
    ojson voters = ojson::array();
    for (const auto& v : r->voters) {
      voters.push_back({{"source", v.source}, {"date", v.date}, {"label", v.label}, {"confidence", v.confidence},
                        {"confidence_pct", format_percent(v.confidence)}});
    }
    ojson row = {
        {"id", r->id},
        {"site", r->site},
        {"true_label", r->true_label},
        {"true_name", name_of(r->true_label)},
        {"clean_label", r->clean_label},
        {"clean_confidence", r->clean_confidence},
        {"clean_confidence_pct", format_percent(r->clean_confidence)},
        {"adv_label", r->adv_label},
        {"adv_confidence", r->adv_confidence},
        {"adv_confidence_pct", format_percent(r->adv_confidence)},
        {"attack_success", r->attack_success},
        {"iterations", r->iterations},
        {"queries", r->queries},
        {"mask_fallback", r->mask_fallback},
        {"defended", r->defended},
        {"baseline_label", r->baseline_label ? ojson(*r->baseline_label) : ojson(nullptr)},
        {"baseline_confidence", r->baseline_confidence},
        {"voted_label", r->voted_label},
        {"voted_confidence", r->voted_confidence},
        {"suspected_attack", r->suspected_attack},
        {"voters", voters},
        {"warnings", r->warnings},
        {"note", r->note},
    };
    rows.push_back(std::move(row));
  }
  const ReportAggregates a = report.aggregates();
  ojson doc = {
      {"rows", rows},
      {"aggregates",
       {{"test_images", a.test_images},
        {"clean_correct", a.clean_correct},
        {"clean_accuracy", a.clean_accuracy()},
        {"attacked", a.attacked},
        {"attack_successes", a.attack_successes},
        {"attack_success_rate", a.attack_success_rate()},
        {"defended_correct", a.defended_correct},
        {"defense_success_rate", a.defense_success_rate()},
        {"baseline_correct", a.baseline_correct},
        {"baseline_defense_rate", a.baseline_defense_rate()},
        {"history_correct", a.history_correct},
        {"defended_with_correct_history", a.defended_with_correct_history}}},
  };
  return doc.dump(2) + "\n";
}

}  // namespace

ReportFormat parse_report_format(std::string_view name) {
  if (name == "text" || name == "table") return ReportFormat::text;
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  raise(ErrorCode::InvalidArgument, "unknown report format '" + std::string(name) + "'");
}

std::string format_percent(double probability) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", probability * 100.0);
  return buf;
}

std::string emit_report(const ExperimentReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::text: return emit_text(report);
    case ReportFormat::csv: return emit_csv(report);
    case ReportFormat::json: return emit_json(report);
  }
  return {};
}

ExperimentReport parse_report_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    ExperimentReport report;
    const auto& agg = doc.at("aggregates");
    report.test_images = agg.at("test_images").get<std::size_t>();
    report.clean_correct = agg.at("clean_correct").get<std::size_t>();
    for (const auto& j : doc.at("rows")) {
      ReportRow r;
      r.id = j.at("id").get<std::string>();
      r.site = j.at("site").get<std::size_t>();
      r.true_label = j.at("true_label").get<int>();
      r.clean_label = j.at("clean_label").get<int>();
      r.clean_confidence = j.at("clean_confidence").get<double>();
      r.adv_label = j.at("adv_label").get<int>();
      r.adv_confidence = j.at("adv_confidence").get<double>();
      r.attack_success = j.at("attack_success").get<bool>();
      r.iterations = j.at("iterations").get<int>();
      r.queries = j.at("queries").get<std::size_t>();
      r.mask_fallback = j.at("mask_fallback").get<bool>();
      r.defended = j.at("defended").get<bool>();
      if (!j.at("baseline_label").is_null()) r.baseline_label = j.at("baseline_label").get<int>();
      r.baseline_confidence = j.at("baseline_confidence").get<double>();
      r.voted_label = j.at("voted_label").get<int>();
      r.voted_confidence = j.at("voted_confidence").get<double>();
      r.suspected_attack = j.at("suspected_attack").get<bool>();
      for (const auto& v : j.at("voters")) {
        r.voters.push_back({v.at("source").get<std::string>(), v.at("date").get<std::string>(),
                            v.at("label").get<int>(), v.at("confidence").get<double>()});
      }
      r.warnings = j.at("warnings").get<std::vector<std::string>>();
      r.note = j.at("note").get<std::string>();
      report.rows.push_back(std::move(r));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::MalformedFile, std::string("report json: ") + e.what());
  }
}

}  // namespace chrono_shield
