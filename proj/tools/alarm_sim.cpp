// Command-line front end for the alarm random-access simulator.
//
//   alarm_sim run CONFIG --out DIR [--seed S] [--set key=value]...
//   alarm_sim sweep [CONFIG | --preset NAME] --out DIR [--events-per-cell]
//   alarm_sim oracle INSTANCE [--trials N]
//   alarm_sim gradcheck [--trials K]
//   alarm_sim complexity [--m-range A..B]
//   alarm_sim verify DIR
//
// Exit codes: 0 success, 1 runtime failure or failed check, 2 invalid
// configuration or arguments, 3 oracle enumeration budget exceeded.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "alarm_sim/config_file.hpp"
#include "alarm_sim/harness.hpp"
#include "alarm_sim/oracle.hpp"
#include "alarm_sim/oracle_instances.hpp"
#include "alarm_sim/results_io.hpp"
#include "alarm_sim/tiny_net.hpp"

namespace {

using namespace alarm_sim;

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBudget = 3;

std::size_t default_jobs() {
    if (const char* env = std::getenv("ALARM_SIM_JOBS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring ALARM_SIM_JOBS=" << env << "\n";
    }
    return 1;
}

struct CommonRunOptions {
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> channels;
    std::optional<std::size_t> devices;
    std::optional<std::string> agent;
    std::optional<std::size_t> events;
    std::optional<std::size_t> runs;
    std::string out;
    std::size_t jobs = 0;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--set", sets, "Override a config key (key=value), repeatable");
        cmd->add_option("--seed", seed, "Master seed");
        cmd->add_option("--channels", channels, "Number of orthogonal channels M");
        cmd->add_option("--devices", devices, "Number of devices |N|");
        cmd->add_option("--agent", agent, "Agent kind: nnbb, mab, mqlfa, rs");
        cmd->add_option("--events", events, "Alarm events per run");
        cmd->add_option("--runs", runs, "Independent runs per cell");
        cmd->add_option("--out", out, "Output directory")->required();
        cmd->add_option("--jobs", jobs, "Worker threads (default: $ALARM_SIM_JOBS or 1)");
    }

    std::vector<std::string> overrides() const {
        std::vector<std::string> all = sets;
        if (seed) all.push_back(fmt::format("seed={}", *seed));
        if (channels) all.push_back(fmt::format("channels={}", *channels));
        if (devices) all.push_back(fmt::format("n_devices={}", *devices));
        if (agent) all.push_back("agent=" + *agent);
        if (events) all.push_back(fmt::format("n_events={}", *events));
        if (runs) all.push_back(fmt::format("n_runs={}", *runs));
        return all;
    }

    std::size_t resolved_jobs() const { return jobs > 0 ? jobs : default_jobs(); }
};

int report_config_error(const ConfigError& e) {
    std::cerr << "error: invalid configuration\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << "\n";
    return kExitConfig;
}

int cmd_run(const std::string& config_path, const CommonRunOptions& opts) {
    ParsedConfig cfg;
    try {
        cfg = load_config_file(config_path);
        apply_overrides(cfg, opts.overrides());
        if (!cfg.grid.empty()) {
            throw ConfigError({"[grid] section present; use the sweep command"});
        }
    } catch (const ConfigError& e) {
        return report_config_error(e);
    }
    const ExperimentResult res = run_experiment(cfg.base, opts.resolved_jobs());
    write_run_outputs(opts.out, res);
    const Summary& s = res.summary;
    fmt::print("{} N={} M={} lambda={}: success {:.4f} [{:.4f}, {:.4f}], converged {}/{}\n",
               to_string(res.config.agent), res.config.n_devices, res.config.channels,
               res.config.lambda, s.mean_success_rate, s.ci95_low, s.ci95_high, s.converged_runs,
               s.runs);
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& preset,
              const CommonRunOptions& opts, bool per_cell_events) {
    ParsedConfig cfg;
    std::vector<RunConfig> cells;
    try {
        if (!preset.empty() && !config_path.empty()) {
            throw ConfigError({"give either a config file or --preset, not both"});
        }
        if (!preset.empty()) {
            cfg = parse_config_text(preset_text(preset));
        } else if (!config_path.empty()) {
            cfg = load_config_file(config_path);
        } else {
            throw ConfigError({"sweep needs a config file or --preset"});
        }
        apply_overrides(cfg, opts.overrides());
        cells = cfg.sweep_grid().cells();
    } catch (const ConfigError& e) {
        return report_config_error(e);
    }
    const auto rows = sweep(cfg.sweep_grid(), opts.resolved_jobs());
    write_sweep_outputs(opts.out, cfg.base, rows, per_cell_events);
    for (const auto& row : rows) {
        const auto& c = row.cell;
        const auto& s = row.result.summary;
        fmt::print("{:<6} N={:<3} M={} lambda={} hidden={}x{}: success {:.4f} converged {}/{}\n",
                   to_string(c.agent), c.n_devices, c.channels, c.lambda, c.hidden_layers,
                   c.hidden_size, s.mean_success_rate, s.converged_runs, s.runs);
    }
    return 0;
}

int cmd_oracle(const std::string& instance_name, std::optional<std::size_t> trials,
               std::optional<std::uint64_t> budget) {
    OracleInstance inst;
    try {
        inst = load_oracle_instance(instance_name);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (trials) inst.trials = *trials;
    OracleOptions options;
    if (budget) options.term_budget = *budget;

    double exact = 0.0;
    try {
        exact = exact_success_prob(inst.policy, options);
    } catch (const EnumerationBudgetExceeded& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBudget;
    }
    Rng rng(inst.seed);
    const McEstimate mc = mc_success_rate(inst.policy, inst.trials, rng);
    const double se = binomial_std_error(exact, inst.trials);
    const bool pass = std::abs(mc.mean - exact) <= 3.0 * se;
    fmt::print("instance       {}\n", inst.name);
    fmt::print("exact          {}\n", format_real(exact));
    fmt::print("monte_carlo    {} ({} trials)\n", format_real(mc.mean), mc.trials);
    fmt::print("std_error      {}\n", format_real(se));
    fmt::print("agreement_3se  {}\n", pass ? "PASS" : "FAIL");
    return pass ? 0 : kExitRuntime;
}

int cmd_gradcheck(std::size_t trials, std::uint64_t seed, double perturb) {
    if (trials < 1) {
        std::cerr << "error: --trials must be >= 1\n";
        return kExitConfig;
    }
    Rng rng(seed);
    GradientHook hook;
    if (perturb != 0.0) {
        hook = [perturb](std::vector<double>& g) { g.back() += perturb; };
    }
    const GradCheckReport r = gradient_check(trials, rng, hook);
    fmt::print("trials              {}\n", r.trials);
    fmt::print("max_relative_error  {}\n", format_real(r.max_rel_error));
    fmt::print("worst_trial         {}\n", r.worst_trial);
    fmt::print("worst_layer         {}\n", r.worst_layer);
    fmt::print("worst_param         {}\n", r.worst_param);
    fmt::print("tolerance           {}\n", format_real(r.tolerance));
    fmt::print("result              {}\n", r.passed() ? "PASS" : "FAIL");
    return r.passed() ? 0 : kExitRuntime;
}

int cmd_complexity(const std::string& range) {
    unsigned lo = 0;
    unsigned hi = 0;
    const auto dots = range.find("..");
    try {
        if (dots == std::string::npos) throw std::invalid_argument("missing '..'");
        lo = static_cast<unsigned>(std::stoul(range.substr(0, dots)));
        hi = static_cast<unsigned>(std::stoul(range.substr(dots + 2)));
    } catch (const std::exception&) {
        std::cerr << "error: --m-range expects A..B, got '" << range << "'\n";
        return kExitConfig;
    }
    if (lo < 1 || lo > hi || hi > 16) {
        std::cerr << "error: --m-range needs 1 <= A <= B <= 16\n";
        return kExitConfig;
    }
    fmt::print("{:>3} {:>8} {:>16} {:>16} {:>10}\n", "M", "per_pass", "lower", "upper", "ratio");
    std::optional<std::uint64_t> prev;
    for (unsigned m = lo; m <= hi; ++m) {
        const auto c = complexity_bounds(m, 30ULL << m);
        const std::string ratio =
            prev ? fmt::format("{:.6f}", static_cast<double>(c.lower) / static_cast<double>(*prev))
                 : std::string("-");
        fmt::print("{:>3} {:>8} {:>16} {:>16} {:>10}\n", m, c.per_pass, c.lower, c.upper, ratio);
        prev = c.lower;
    }
    return 0;
}

int cmd_verify(const std::string& dir) {
    const VerifyReport r = verify_outputs(dir);
    for (const auto& m : r.mismatches) std::cerr << "mismatch: " << m << "\n";
    fmt::print("rows checked {}, mismatches {}: {}\n", r.rows_checked, r.mismatches.size(),
               r.ok() ? "OK" : "FAILED");
    return r.ok() ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Alarm random-access simulator with learning agents"};
    app.require_subcommand(1);

    std::string run_config;
    CommonRunOptions run_opts;
    auto* run = app.add_subcommand("run", "Run one experiment configuration");
    run->add_option("config", run_config, "Config file (key = value)")->required();
    run_opts.add_to(run);

    std::string sweep_config;
    std::string preset;
    bool per_cell_events = false;
    CommonRunOptions sweep_opts;
    auto* sw = app.add_subcommand("sweep", "Run every cell of a grid or named preset");
    sw->add_option("config", sweep_config, "Config file with a [grid] section");
    sw->add_option("--preset", preset, "Named preset: fig4, fig5, fig6, fig7, fig8");
    sw->add_flag("--events-per-cell", per_cell_events, "Write cells/cell_NNN_events.csv files");
    sweep_opts.add_to(sw);

    std::string instance;
    std::optional<std::size_t> oracle_trials;
    std::optional<std::uint64_t> oracle_budget;
    auto* oracle = app.add_subcommand("oracle", "Exact success probability vs Monte Carlo");
    oracle->add_option("instance", instance, "Bundled instance name or JSON file")->required();
    oracle->add_option("--trials", oracle_trials, "Monte Carlo trials");
    oracle->add_option("--budget", oracle_budget, "Enumeration term budget");
    oracle->add_flag_callback("--list", [] {
        for (const auto& n : bundled_instance_names()) std::cout << n << "\n";
        std::exit(0);
    }, "List bundled instances");

    std::size_t gc_trials = 100;
    std::uint64_t gc_seed = 2024;
    double gc_perturb = 0.0;
    auto* gc = app.add_subcommand("gradcheck", "Backprop vs central finite differences");
    gc->add_option("--trials", gc_trials, "Random (net, batch) pairs");
    gc->add_option("--seed", gc_seed, "Seed");
    gc->add_option("--perturb", gc_perturb, "Add this to one analytic gradient entry (fault injection)");

    std::string m_range = "1..10";
    auto* cx = app.add_subcommand("complexity", "Operation-count bounds per decision");
    cx->add_option("--m-range", m_range, "Channel range A..B");

    std::string verify_dir;
    auto* vf = app.add_subcommand("verify", "Recompute summary.json from event files");
    vf->add_option("dir", verify_dir, "Result directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(run_config, run_opts);
        if (sw->parsed()) return cmd_sweep(sweep_config, preset, sweep_opts, per_cell_events);
        if (oracle->parsed()) return cmd_oracle(instance, oracle_trials, oracle_budget);
        if (gc->parsed()) return cmd_gradcheck(gc_trials, gc_seed, gc_perturb);
        if (cx->parsed()) return cmd_complexity(m_range);
        if (vf->parsed()) return cmd_verify(verify_dir);
    } catch (const ConfigError& e) {
        return report_config_error(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitRuntime;
}
