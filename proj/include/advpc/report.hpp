#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace advpc::harness {

// One cell of the attack x defense x target grid. asr is a percentage; cd and
// hd are raw (unscaled) mean distances between clean and defended clouds.
struct ReportRow {
  std::string proxy;
  std::string attack;
  std::string defense;
  std::string target;
  double asr = 0.0;
  double cd = 0.0;
  double hd = 0.0;
  double ms_per_cloud = 0.0;
  // Marker row written when a stage aborted; `error` holds the reason.
  bool failed = false;
  std::string error;

  bool operator==(const ReportRow&) const = default;
};

struct EvaluationReport {
  std::vector<ReportRow> rows;
  std::map<std::string, std::string> metadata;

  bool operator==(const EvaluationReport&) const = default;

  // Rows matching the given key, or nullptr.
  const ReportRow* find(std::string_view attack, std::string_view defense,
                        std::string_view target) const;
};

inline constexpr std::string_view kCsvHeader =
    "proxy,attack,defense,target,asr,cd_e2,hd_e2,ms_per_cloud";
inline constexpr std::string_view kVersion = "advpc 1.0.0";

enum class ReportFormat { csv, json };

// x * 100 with two decimals: 0.017 -> "1.70".
std::string format_e2(double raw);

// CSV with the fixed header. When include_timing is false the wall-time
// column is left empty so the output is reproducible across runs.
std::string to_csv(const EvaluationReport& report, bool include_timing = true);
std::string to_json(const EvaluationReport& report);
EvaluationReport report_from_json(std::string_view text);

// Throws Error if the file cannot be written.
void emit_report(const EvaluationReport& report, const std::filesystem::path& path,
                 ReportFormat format);

// Copy with every wall-time field zeroed.
EvaluationReport without_timing(EvaluationReport report);

}  // namespace advpc::harness
