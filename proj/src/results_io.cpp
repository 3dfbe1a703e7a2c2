#include "alarm_sim/results_io.hpp"

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "alarm_sim/config_file.hpp"

namespace alarm_sim {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string format_real(double v) { return fmt::format("{:.17g}", v); }

void write_events_csv(std::ostream& out, const ExperimentResult& result, bool header) {
    const RunConfig& c = result.config;
    if (header) out << kEventsHeader << '\n';
    const std::string agent(to_string(c.agent));
    const std::string lambda = format_real(c.lambda);
    std::string line;
    for (const auto& run : result.runs) {
        const auto& s = run.series;
        for (std::size_t e = 0; e < s.success.size(); ++e) {
            line.clear();
            fmt::format_to(std::back_inserter(line), "{},{},{},{},{},{},{},{},{},{}\n", run.run_id, e,
                           s.n_active[e], static_cast<int>(s.success[e]), format_real(s.epsilon[e]),
                           s.mse_sys[e] ? format_real(*s.mse_sys[e]) : std::string(), agent,
                           c.n_devices, c.channels, lambda);
            out << line;
        }
    }
}

ojson summary_row(const ExperimentResult& result, const std::optional<std::string>& events_file) {
    const Summary& s = result.summary;
    ojson row;
    row["cell"] = config_to_json(result.config);
    row["runs"] = s.runs;
    row["mean_success_rate"] = s.mean_success_rate;
    row["ci95"] = {s.ci95_low, s.ci95_high};
    row["convergence_event"] =
        s.mean_convergence_event ? ojson(*s.mean_convergence_event) : ojson(nullptr);
    row["converged_fraction"] = s.converged_fraction;
    row["converged_runs"] = s.converged_runs;
    row["alarm_resamples"] = s.alarm_resamples;
    row["events_file"] = events_file ? ojson(*events_file) : ojson(nullptr);
    return row;
}

ojson make_manifest(const std::string& command, const RunConfig& base,
                    const std::vector<RunConfig>& cells) {
    ojson m;
    m["tool"] = kToolVersion;
    m["command"] = command;
    m["events_schema"] = {{"version", kEventsSchemaVersion}, {"columns", kEventsHeader}};
    m["seed"] = base.seed;
    m["config"] = config_to_json(base);
    ojson arr = ojson::array();
    for (const auto& c : cells) arr.push_back(config_to_json(c));
    m["cells"] = std::move(arr);
    return m;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_json(const fs::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

void write_events_file(const fs::path& path, const ExperimentResult& result) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_events_csv(out, result);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

void write_run_outputs(const fs::path& dir, const ExperimentResult& result) {
    fs::create_directories(dir);
    write_events_file(dir / "events.csv", result);
    ojson summary;
    summary["rows"] = ojson::array({summary_row(result, std::string("events.csv"))});
    write_json(dir / "summary.json", summary);
    write_json(dir / "manifest.json", make_manifest("run", result.config, {result.config}));
}

void write_sweep_outputs(const fs::path& dir, const RunConfig& base,
                         const std::vector<SweepRow>& rows, bool per_cell_events) {
    fs::create_directories(dir);
    ojson summary;
    summary["rows"] = ojson::array();
    std::vector<RunConfig> cells;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::optional<std::string> events;
        if (per_cell_events) {
            fs::create_directories(dir / "cells");
            events = fmt::format("cells/cell_{:03}_events.csv", i);
            write_events_file(dir / *events, rows[i].result);
        }
        summary["rows"].push_back(summary_row(rows[i].result, events));
        cells.push_back(rows[i].cell);
    }
    write_json(dir / "summary.json", summary);
    write_json(dir / "manifest.json", make_manifest("sweep", base, cells));
}

std::vector<std::vector<std::uint8_t>> read_success_bits(const fs::path& csv, std::size_t n_runs) {
    std::ifstream in(csv);
    if (!in) throw std::runtime_error("cannot open " + csv.string());
    std::string line;
    if (!std::getline(in, line) || line != kEventsHeader) {
        throw std::runtime_error(csv.string() + ": unexpected header");
    }
    std::vector<std::vector<std::uint8_t>> bits(n_runs);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream fields(line);
        std::string run_id, event_idx, n_active, xi;
        if (!std::getline(fields, run_id, ',') || !std::getline(fields, event_idx, ',') ||
            !std::getline(fields, n_active, ',') || !std::getline(fields, xi, ',')) {
            throw std::runtime_error(fmt::format("{}:{}: malformed row", csv.string(), lineno));
        }
        const std::size_t run = std::stoul(run_id);
        const std::size_t event = std::stoul(event_idx);
        if (run >= n_runs || event != bits[run].size() || (xi != "0" && xi != "1")) {
            throw std::runtime_error(fmt::format("{}:{}: inconsistent row", csv.string(), lineno));
        }
        bits[run].push_back(xi == "1" ? 1 : 0);
    }
    return bits;
}

VerifyReport verify_outputs(const fs::path& dir) {
    VerifyReport report;
    std::ifstream in(dir / "summary.json");
    if (!in) throw std::runtime_error("cannot open " + (dir / "summary.json").string());
    const auto summary = nlohmann::json::parse(in);

    const auto& rows = summary.at("rows");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.at("events_file").is_null()) {
            report.mismatches.push_back(fmt::format("row {}: no events file to verify against", i));
            continue;
        }
        const RunConfig cfg = config_from_json(row.at("cell"));
        const auto bits = read_success_bits(dir / row.at("events_file").get<std::string>(),
                                            cfg.n_runs);
        ExperimentResult res;
        res.config = cfg;
        for (std::size_t r = 0; r < bits.size(); ++r) {
            if (bits[r].size() != cfg.n_events) {
                report.mismatches.push_back(fmt::format("row {}: run {} has {} events, expected {}",
                                                        i, r, bits[r].size(), cfg.n_events));
            }
            res.runs.push_back(outcome_from_bits(r, bits[r], cfg));
        }
        res.summary = summarize(res.runs);
        // Compare through the same serialisation the writer used.
        const nlohmann::json expected =
            nlohmann::json::parse(summary_row(res, row.at("events_file").get<std::string>()).dump());
        for (const char* key : {"runs", "mean_success_rate", "ci95", "convergence_event",
                                "converged_fraction", "converged_runs"}) {
            if (expected.at(key) != row.at(key)) {
                report.mismatches.push_back(fmt::format("row {}: {} is {}, recomputed {}", i, key,
                                                        row.at(key).dump(), expected.at(key).dump()));
            }
        }
        ++report.rows_checked;
    }
    return report;
}

}  // namespace alarm_sim
