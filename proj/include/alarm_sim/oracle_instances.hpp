#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "alarm_sim/oracle.hpp"

namespace alarm_sim {

/// A static-policy instance for the oracle command, stored as JSON:
///
///     {"name": "...", "channels": 2, "activation": [1, 1],
///      "policy": [[0.25, 0.25, 0.25, 0.25], ...], "trials": 100000, "seed": 7}
struct OracleInstance {
    std::string name;
    StaticPolicyMatrix policy;
    std::size_t trials = 100000;
    std::uint64_t seed = 7;
    std::optional<double> expected;  // known exact value, bundled instances only
};

OracleInstance parse_oracle_instance(std::string_view json_text);
std::vector<std::string> bundled_instance_names();
std::optional<OracleInstance> bundled_instance(std::string_view name);
/// A bundled name, or else a path to an instance file.
OracleInstance load_oracle_instance(const std::string& name_or_path);

}  // namespace alarm_sim
