#include <doctest.h>

#include <algorithm>
#include <stdexcept>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "alarm_sim/config_file.hpp"
#include "alarm_sim/results_io.hpp"

using namespace alarm_sim;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("alarm_sim_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RunConfig tiny_config() {
    RunConfig c;
    c.agent = AgentKind::mab;
    c.n_devices = 6;
    c.channels = 2;
    c.n_events = 400;
    c.n_runs = 2;
    c.conv_window = 100;
    c.eval_window = 100;
    return c;
}

}  // namespace

TEST_CASE("config text") {
    const auto cfg = parse_config_text(R"(
# comment line
n_devices = 40   # trailing comment
channels=4
rho_db = 20
hidden = 1x10
agent = rs

[grid]
lambda = 1, 2.5 ,4
)");
    CHECK(cfg.base.n_devices == 40);
    CHECK(cfg.base.channels == 4);
    CHECK(cfg.base.rho_db == 20.0);
    CHECK(cfg.base.hidden_layers == 1);
    CHECK(cfg.base.hidden_size == 10);
    CHECK(cfg.base.agent == AgentKind::rs);
    REQUIRE(cfg.grid.size() == 1);
    CHECK(cfg.grid[0].first == "lambda");
    CHECK(cfg.grid[0].second == std::vector<std::string>{"1", "2.5", "4"});
    const auto cells = cfg.sweep_grid().cells();
    REQUIRE(cells.size() == 3);
    CHECK(cells[1].lambda == 2.5);
}

TEST_CASE("config errors are collected") {
    try {
        parse_config_text("n_devices = many\nbogus = 1\n[other]\nnot a pair\nlambda = -2\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.problems().size() == 5);
    }
    CHECK_THROWS_AS(parse_config_text("[grid]\nchannels = 2, x\n"), ConfigError);
}

TEST_CASE("missing config file") {
    try {
        load_config_file("/nonexistent/dir/run.cfg");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/dir/run.cfg") != std::string::npos);
    }
}

TEST_CASE("overrides replace base values and grid axes") {
    auto cfg = parse_config_text("channels = 2\n[grid]\nchannels = 2, 3\nagent = mab, rs\n");
    apply_overrides(cfg, {"channels=4", "seed = 9"});
    CHECK(cfg.base.channels == 4);
    CHECK(cfg.base.seed == 9);
    REQUIRE(cfg.grid.size() == 1);
    CHECK(cfg.grid[0].first == "agent");
    CHECK_THROWS_AS(apply_overrides(cfg, {"channels"}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(cfg, {"n_runs=0"}), ConfigError);
}

TEST_CASE("figure presets") {
    CHECK(preset_names() == std::vector<std::string>{"fig4", "fig5", "fig6", "fig7", "fig8"});
    const auto fig4 = parse_config_text(preset_text("fig4")).sweep_grid().cells();
    CHECK(fig4.size() == 64);
    CHECK(parse_config_text(preset_text("fig5")).sweep_grid().cells().size() == 60);
    const auto fig6 = parse_config_text(preset_text("fig6"));
    bool has_lambda = false;
    for (const auto& [key, values] : fig6.grid) {
        if (key == "lambda") {
            has_lambda = true;
            CHECK(values == std::vector<std::string>{"1", "2", "3", "4"});
        }
    }
    CHECK(has_lambda);
    const auto fig7 = parse_config_text(preset_text("fig7")).sweep_grid().cells();
    CHECK(fig7.size() == 6);
    for (const auto& c : fig7) CHECK(c.agent == AgentKind::nnbb);
    CHECK_THROWS_AS(preset_text("fig9"), ConfigError);
}

TEST_CASE("config json round trip") {
    RunConfig c = tiny_config();
    c.rho_db = 0.1;
    c.lambda = 2.0 / 3.0;
    c.seed = 123456789012345ULL;
    const RunConfig back = config_from_json(nlohmann::json::parse(config_to_json(c).dump()));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(back.lambda == c.lambda);
}

TEST_CASE("real formatting round-trips") {
    Rng rng(1);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int i = 0; i < 10000; ++i) {
        const double v = i % 2 ? u(rng) : uniform01(rng) * 1e-7;
        CHECK(std::strtod(format_real(v).c_str(), nullptr) == v);
    }
    CHECK(format_real(0.1) == "0.10000000000000001");
    CHECK(format_real(3.0) == "3");
}

TEST_CASE("events csv layout") {
    const RunConfig c = tiny_config();
    const auto res = run_experiment(c);
    std::ostringstream out;
    write_events_csv(out, res);
    const std::string text = out.str();
    CHECK(text.find('\r') == std::string::npos);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line == kEventsHeader);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 9);
        // MAB never defines an error, so the mse column is empty.
        CHECK(line.find(",,mab,6,2,3") != std::string::npos);
    }
    CHECK(rows == c.n_runs * c.n_events);
}

TEST_CASE("run outputs verify and detect tampering") {
    const fs::path dir = scratch_dir("verify");
    const auto res = run_experiment(tiny_config());
    write_run_outputs(dir, res);
    for (const char* f : {"events.csv", "summary.json", "manifest.json"}) CHECK(fs::exists(dir / f));

    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest.at("tool") == kToolVersion);
    CHECK(manifest.at("config").at("channels") == 2);
    CHECK(manifest.at("events_schema").at("version") == kEventsSchemaVersion);

    const auto report = verify_outputs(dir);
    CHECK(report.ok());
    CHECK(report.rows_checked == 1);

    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    summary["rows"][0]["mean_success_rate"] = 0.123;
    std::ofstream(dir / "summary.json") << summary.dump(2);
    const auto bad = verify_outputs(dir);
    CHECK_FALSE(bad.ok());
    CHECK(bad.mismatches.size() == 1);
    fs::remove_all(dir);
}

TEST_CASE("success bits read back from events") {
    const fs::path dir = scratch_dir("bits");
    const auto res = run_experiment(tiny_config());
    write_run_outputs(dir, res);
    const auto bits = read_success_bits(dir / "events.csv", 2);
    REQUIRE(bits.size() == 2);
    CHECK(bits[0] == res.runs[0].series.success);
    CHECK(bits[1] == res.runs[1].series.success);
    CHECK_THROWS(read_success_bits(dir / "summary.json", 2));
    fs::remove_all(dir);
}

TEST_CASE("sweep outputs") {
    const fs::path dir = scratch_dir("sweep");
    SweepGrid g;
    g.base = tiny_config();
    g.base.n_runs = 1;
    g.axes = {{"agent", {"mab", "rs"}}};
    const auto rows = sweep(g);
    write_sweep_outputs(dir, g.base, rows, true);
    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    REQUIRE(summary.at("rows").size() == 2);
    CHECK(summary["rows"][1]["cell"]["agent"] == "rs");
    CHECK(summary["rows"][0]["events_file"] == "cells/cell_000_events.csv");
    CHECK(fs::exists(dir / "cells/cell_001_events.csv"));
    CHECK(verify_outputs(dir).ok());

    const fs::path dir2 = scratch_dir("sweep_noevents");
    write_sweep_outputs(dir2, g.base, rows, false);
    CHECK(nlohmann::json::parse(slurp(dir2 / "summary.json"))["rows"][0]["events_file"].is_null());
    CHECK_FALSE(verify_outputs(dir2).ok());
    fs::remove_all(dir);
    fs::remove_all(dir2);
}
