#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alarm_sim/harness.hpp"

namespace alarm_sim {

/// Flat key = value configuration with an optional [grid] section whose
/// values are comma-separated axis lists:
///
///     # comment
///     n_devices = 20
///     channels = 3
///     [grid]
///     agent = nnbb, mab, mqlfa, rs
struct ParsedConfig {
    RunConfig base;
    std::vector<std::pair<std::string, std::vector<std::string>>> grid;

    SweepGrid sweep_grid() const { return SweepGrid{base, grid}; }
};

/// Throws ConfigError listing every bad line or field.
ParsedConfig parse_config_text(std::string_view text);
ParsedConfig load_config_file(const std::filesystem::path& path);

/// Applies "key=value" overrides on top of the base config.
void apply_overrides(ParsedConfig& config, const std::vector<std::string>& overrides);

std::vector<std::string> preset_names();
/// Config text for a named figure preset; throws ConfigError when unknown.
std::string_view preset_text(std::string_view name);

nlohmann::ordered_json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);

}  // namespace alarm_sim
