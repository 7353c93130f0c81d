#pragma once

#include <filesystem>
#include <string>

#include "cascade/evaluation.hpp"
#include "json.hpp"

namespace cascade {

enum class ReportFormat { kJson, kCsvBundle };

inline constexpr int kReportSchemaVersion = 1;

/// Round to 6 significant digits; every float in emitted reports goes through this.
double round_sig6(double value);

nlohmann::ordered_json config_to_json(const CascadeConfig& config);
CascadeConfig config_from_json(const nlohmann::json& doc);

nlohmann::ordered_json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& doc);

/// kJson writes one document at `path`; kCsvBundle writes a directory of
/// CSV tables (summary, base_topk, sweep, margin_buckets, error_buckets,
/// order_accuracy). Output is deterministic for a given report.
void emit_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format);

EvalReport load_report(const std::filesystem::path& path);

/// create_directories that reports failure as RuntimeFailure.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace cascade
