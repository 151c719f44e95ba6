#include "advpc/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "advpc/error.hpp"

namespace advpc::harness {

using nlohmann::json;

const ReportRow* EvaluationReport::find(std::string_view attack, std::string_view defense,
                                        std::string_view target) const {
  for (const auto& r : rows) {
    if (!r.failed && r.attack == attack && r.defense == defense && r.target == target) return &r;
  }
  return nullptr;
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// Names are plain identifiers, but quote defensively so a stray comma in an
// error message cannot shift columns.
std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_e2(double raw) { return fixed(raw * 100.0, 2); }

std::string to_csv(const EvaluationReport& report, bool include_timing) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : report.rows) {
    out += csv_cell(r.proxy) + ',' + csv_cell(r.attack) + ',' + csv_cell(r.defense) + ',' +
           csv_cell(r.target) + ',';
    if (r.failed) {
      out += "failed,failed,failed,failed\n";
      continue;
    }
    out += fixed(r.asr, 2) + ',' + format_e2(r.cd) + ',' + format_e2(r.hd) + ',';
    if (include_timing) out += fixed(r.ms_per_cloud, 3);
    out += '\n';
  }
  return out;
}

std::string to_json(const EvaluationReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json j = {{"proxy", r.proxy},   {"attack", r.attack}, {"defense", r.defense},
              {"target", r.target}, {"asr", r.asr},       {"cd", r.cd},
              {"hd", r.hd},         {"ms_per_cloud", r.ms_per_cloud}};
    if (r.failed) {
      j["failed"] = true;
      j["error"] = r.error;
    }
    rows.push_back(std::move(j));
  }
  json doc = {{"metadata", report.metadata}, {"rows", std::move(rows)}};
  return doc.dump(2) + "\n";
}

EvaluationReport report_from_json(std::string_view text) {
  EvaluationReport report;
  try {
    const auto doc = json::parse(text);
    report.metadata = doc.at("metadata").get<std::map<std::string, std::string>>();
    for (const auto& j : doc.at("rows")) {
      ReportRow r;
      r.proxy = j.at("proxy").get<std::string>();
      r.attack = j.at("attack").get<std::string>();
      r.defense = j.at("defense").get<std::string>();
      r.target = j.at("target").get<std::string>();
      r.asr = j.at("asr").get<double>();
      r.cd = j.at("cd").get<double>();
      r.hd = j.at("hd").get<double>();
      r.ms_per_cloud = j.at("ms_per_cloud").get<double>();
      r.failed = j.value("failed", false);
      r.error = j.value("error", std::string{});
      report.rows.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("report_from_json: ") + e.what());
  }
  return report;
}

void emit_report(const EvaluationReport& report, const std::filesystem::path& path,
                 ReportFormat format) {
  for (const auto& r : report.rows) {
    if (r.failed) continue;
    if (!(r.asr >= 0.0 && r.asr <= 100.0) || !(r.cd >= 0.0) || !(r.hd >= 0.0))
      throw Error("emit_report: row " + r.attack + "/" + r.defense + "/" + r.target +
                  " out of range");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("emit_report: cannot write '" + path.string() + "'");
  out << (format == ReportFormat::csv ? to_csv(report) : to_json(report));
  out.flush();
  if (!out) throw Error("emit_report: write to '" + path.string() + "' failed");
}

EvaluationReport without_timing(EvaluationReport report) {
  for (auto& r : report.rows) r.ms_per_cloud = 0.0;
  return report;
}

}  // namespace advpc::harness
