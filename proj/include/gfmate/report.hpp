#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "gfmate/harness.hpp"

namespace gfmate {

nlohmann::json report_to_json(const MetricReport& r);
MetricReport report_from_json(const nlohmann::json& j);

/// report.json, per_seed.csv, history_seed{k}.csv and timing.json in `dir`.
/// Everything except timing.json is a pure function of the report numbers.
void write_report_files(const MetricReport& r, const std::filesystem::path& dir);

MetricReport read_report(const std::filesystem::path& report_json);

/// Accuracy column of per_seed.csv.
std::vector<double> read_per_seed_accuracies(const std::filesystem::path& csv);

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path);

/// One subdirectory per report plus a sweep.json summary.
void write_sweep_reports(const std::vector<MetricReport>& reports, const std::filesystem::path& dir);

nlohmann::json audit_to_json(const AuditReport& a);

}  // namespace gfmate
