#include "alarm_sim/oracle_instances.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace alarm_sim {

namespace {

struct Bundled {
    const char* name;
    const char* json;
    double expected;
};

// Expected values are exact: enumeration over 4 and 16 joint patterns for the
// two-device cases, trivial for the others.
const Bundled kBundled[] = {
    {"two-dev-m1-uniform",
     R"({"name": "two-dev-m1-uniform", "channels": 1, "activation": [1, 1],
         "policy": [[0.5, 0.5], [0.5, 0.5]], "trials": 100000, "seed": 11})",
     0.5},
    {"two-dev-m2-uniform",
     R"({"name": "two-dev-m2-uniform", "channels": 2, "activation": [1, 1],
         "policy": [[0.25, 0.25, 0.25, 0.25], [0.25, 0.25, 0.25, 0.25]],
         "trials": 100000, "seed": 12})",
     0.75},
    {"all-silence",
     R"({"name": "all-silence", "channels": 2, "activation": [1, 0.5, 0.25],
         "policy": [[1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]], "trials": 100000, "seed": 13})",
     0.0},
    {"lone-transmitter",
     R"({"name": "lone-transmitter", "channels": 1, "activation": [1, 0, 0],
         "policy": [[0, 1], [0.5, 0.5], [0, 1]], "trials": 100000, "seed": 14})",
     1.0},
};

}  // namespace

OracleInstance parse_oracle_instance(std::string_view json_text) {
    const auto j = nlohmann::json::parse(json_text);
    OracleInstance inst;
    inst.name = j.value("name", std::string("unnamed"));
    inst.policy.channels = j.at("channels").get<unsigned>();
    inst.policy.activation = j.at("activation").get<std::vector<double>>();
    inst.policy.probs = j.at("policy").get<std::vector<std::vector<double>>>();
    inst.trials = j.value("trials", inst.trials);
    inst.seed = j.value("seed", inst.seed);
    if (j.contains("expected")) inst.expected = j.at("expected").get<double>();
    inst.policy.validate();
    return inst;
}

std::vector<std::string> bundled_instance_names() {
    std::vector<std::string> names;
    for (const auto& b : kBundled) names.emplace_back(b.name);
    return names;
}

std::optional<OracleInstance> bundled_instance(std::string_view name) {
    for (const auto& b : kBundled) {
        if (name == b.name) {
            OracleInstance inst = parse_oracle_instance(b.json);
            inst.expected = b.expected;
            return inst;
        }
    }
    return std::nullopt;
}

OracleInstance load_oracle_instance(const std::string& name_or_path) {
    if (auto inst = bundled_instance(name_or_path)) return *inst;
    std::ifstream in(name_or_path);
    if (!in) throw std::invalid_argument(name_or_path + ": not a bundled instance or readable file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_oracle_instance(buf.str());
}

}  // namespace alarm_sim
