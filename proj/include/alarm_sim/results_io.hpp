#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "alarm_sim/harness.hpp"

namespace alarm_sim {

inline constexpr const char* kToolVersion = "alarm_sim 1.0.0";
inline constexpr int kEventsSchemaVersion = 1;

/// Fixed column order of events.csv.
inline constexpr const char* kEventsHeader =
    "run_id,event_idx,n_active,xi,epsilon,mse_sys,agent,n_devices,m_channels,lambda";

/// 17 significant digits; parses back to the identical double.
std::string format_real(double v);

void write_events_csv(std::ostream& out, const ExperimentResult& result, bool header = true);

/// One summary.json row for a finished cell.
nlohmann::ordered_json summary_row(const ExperimentResult& result,
                                   const std::optional<std::string>& events_file);

nlohmann::ordered_json make_manifest(const std::string& command, const RunConfig& base,
                                     const std::vector<RunConfig>& cells);

/// Writes events.csv, summary.json and manifest.json for a single experiment.
void write_run_outputs(const std::filesystem::path& dir, const ExperimentResult& result);

/// Writes summary.json and manifest.json for a sweep; per-cell event files
/// (cells/cell_NNN_events.csv) only when requested.
void write_sweep_outputs(const std::filesystem::path& dir, const RunConfig& base,
                         const std::vector<SweepRow>& rows, bool per_cell_events);

struct VerifyReport {
    std::size_t rows_checked = 0;
    std::vector<std::string> mismatches;

    bool ok() const { return mismatches.empty() && rows_checked > 0; }
};

/// Recomputes every summary.json row from its events file.
VerifyReport verify_outputs(const std::filesystem::path& dir);

/// Per-run success bits for one cell, parsed from an events file.
std::vector<std::vector<std::uint8_t>> read_success_bits(const std::filesystem::path& csv,
                                                         std::size_t n_runs);

}  // namespace alarm_sim
