#include "alarm_sim/config_file.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace alarm_sim {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

// Desk-scale figure presets. Runs and events are scaled down from the
// 100-run studies; override with --set n_runs=100 etc.
const std::map<std::string, std::string, std::less<>>& presets() {
    static const std::map<std::string, std::string, std::less<>> table = {
        {"fig4", R"(# success rate vs number of devices, one series per channel count
n_events = 10000
n_runs = 10
lambda = 3
[grid]
channels = 2, 3, 4, 5
n_devices = 10, 20, 40, 60
agent = nnbb, mab, mqlfa, rs
)"},
        {"fig5", R"(# success rate vs number of channels, one series per network size
n_events = 10000
n_runs = 10
lambda = 3
[grid]
n_devices = 20, 40, 60
channels = 2, 3, 4, 5, 6
agent = nnbb, mab, mqlfa, rs
)"},
        {"fig6", R"(# success rate vs activation scale lambda, 5 channels
n_events = 10000
n_runs = 10
channels = 5
[grid]
n_devices = 20, 40
lambda = 1, 2, 3, 4
agent = nnbb, mab, mqlfa, rs
)"},
        {"fig7", R"(# NNBB hidden-layer shapes, 40 devices
n_events = 16000
n_runs = 10
n_devices = 40
agent = nnbb
[grid]
channels = 5, 6
hidden = 2x1, 1x10, 2x15
)"},
        {"fig8", R"(# NNBB training curves for hidden-layer shapes, 40 devices
n_events = 32000
n_runs = 3
n_devices = 40
agent = nnbb
[grid]
channels = 5, 6
hidden = 2x1, 1x10, 2x15
)"},
    };
    return table;
}

}  // namespace

ParsedConfig parse_config_text(std::string_view text) {
    ParsedConfig cfg;
    std::vector<std::string> problems;
    bool in_grid = false;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t == "[grid]") {
                in_grid = true;
            } else {
                problems.push_back(fmt::format("line {}: unknown section {}", lineno, t));
            }
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            problems.push_back(fmt::format("line {}: expected key = value", lineno));
            continue;
        }
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        if (in_grid) {
            auto values = split_list(value);
            // Validate each axis value against a scratch config.
            for (const auto& v : values) {
                RunConfig scratch;
                if (auto err = apply_setting(scratch, key, v)) problems.push_back("grid." + *err);
            }
            cfg.grid.emplace_back(key, std::move(values));
        } else if (auto err = apply_setting(cfg.base, key, value)) {
            problems.push_back(*err);
        }
    }
    for (auto& p : cfg.base.validate()) problems.push_back(p);
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return cfg;
}

ParsedConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({fmt::format("{}: cannot open config file", path.string())});
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void apply_overrides(ParsedConfig& config, const std::vector<std::string>& overrides) {
    std::vector<std::string> problems;
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) {
            problems.push_back(fmt::format("--set {}: expected key=value", o));
            continue;
        }
        const std::string key = trim(std::string_view(o).substr(0, eq));
        // An override replaces any grid axis of the same name.
        std::erase_if(config.grid, [&](const auto& axis) { return axis.first == key; });
        if (auto err = apply_setting(config.base, key, o.substr(eq + 1))) problems.push_back(*err);
    }
    for (auto& p : config.base.validate()) problems.push_back(p);
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& [name, _] : presets()) names.push_back(name);
    return names;
}

std::string_view preset_text(std::string_view name) {
    const auto& table = presets();
    const auto it = table.find(name);
    if (it == table.end()) {
        throw ConfigError({fmt::format("unknown preset '{}' (available: {})", name,
                                       fmt::join(preset_names(), ", "))});
    }
    return it->second;
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["agent"] = std::string(to_string(c.agent));
    j["n_devices"] = c.n_devices;
    j["channels"] = c.channels;
    j["lambda"] = c.lambda;
    j["gamma"] = c.gamma;
    j["rho_db"] = c.rho_db;
    j["density"] = c.density;
    j["hidden_layers"] = c.hidden_layers;
    j["hidden_size"] = c.hidden_size;
    j["n_events"] = c.n_events;
    j["n_runs"] = c.n_runs;
    j["seed"] = c.seed;
    j["eval_window"] = c.eval_window;
    j["conv_window"] = c.conv_window;
    j["conv_tol"] = c.conv_tol;
    j["initial_lr"] = c.initial_lr;
    j["lr_decay"] = c.lr_decay;
    j["beta0"] = c.beta0;
    j["batch_per_pattern"] = c.batch_per_pattern;
    j["memory_per_pattern"] = c.memory_per_pattern;
    j["measurement_mode"] = c.measurement_mode;
    return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    c.agent = parse_agent_kind(j.at("agent").get<std::string>());
    j.at("n_devices").get_to(c.n_devices);
    j.at("channels").get_to(c.channels);
    j.at("lambda").get_to(c.lambda);
    j.at("gamma").get_to(c.gamma);
    j.at("rho_db").get_to(c.rho_db);
    j.at("density").get_to(c.density);
    j.at("hidden_layers").get_to(c.hidden_layers);
    j.at("hidden_size").get_to(c.hidden_size);
    j.at("n_events").get_to(c.n_events);
    j.at("n_runs").get_to(c.n_runs);
    j.at("seed").get_to(c.seed);
    j.at("eval_window").get_to(c.eval_window);
    j.at("conv_window").get_to(c.conv_window);
    j.at("conv_tol").get_to(c.conv_tol);
    j.at("initial_lr").get_to(c.initial_lr);
    j.at("lr_decay").get_to(c.lr_decay);
    j.at("beta0").get_to(c.beta0);
    j.at("batch_per_pattern").get_to(c.batch_per_pattern);
    j.at("memory_per_pattern").get_to(c.memory_per_pattern);
    j.at("measurement_mode").get_to(c.measurement_mode);
    return c;
}

}  // namespace alarm_sim
