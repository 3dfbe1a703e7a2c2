#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alarm_sim/agents.hpp"
#include "alarm_sim/env_model.hpp"
#include "alarm_sim/rng.hpp"

namespace alarm_sim {

struct RunConfig {
    std::size_t n_devices = 20;
    unsigned channels = 3;
    double lambda = 3.0;
    double gamma = 3.8;
    double rho_db = 10.0;
    double density = 0.2;
    AgentKind agent = AgentKind::nnbb;
    std::size_t hidden_layers = 2;
    std::size_t hidden_size = 1;
    std::size_t n_events = 10000;
    std::size_t n_runs = 100;
    std::uint64_t seed = 1;
    std::size_t eval_window = 2000;
    std::size_t conv_window = 1000;
    double conv_tol = 0.01;
    double initial_lr = 1.0;
    double lr_decay = 0.015;
    double beta0 = 5.0;
    std::size_t batch_per_pattern = 30;
    std::size_t memory_per_pattern = 100;
    std::string measurement_mode = "first-attempt";

    double rho() const { return db_to_linear(rho_db); }
    AgentParams agent_params() const;
    /// One message per offending field; empty when valid.
    std::vector<std::string> validate() const;
};

enum class DeviceMacState { normal, emergency, quiet };

std::string_view to_string(DeviceMacState s);
bool legal_transition(DeviceMacState from, DeviceMacState to);

/// Per-device MAC states; rejects transitions outside NS->ES, NS->QS,
/// ES->NS and QS->NS.
class MacStates {
public:
    explicit MacStates(std::size_t n_devices = 0);

    DeviceMacState at(std::size_t device) const { return states_.at(device); }
    void transition(std::size_t device, DeviceMacState to);
    bool all_in(DeviceMacState s) const;
    std::size_t size() const { return states_.size(); }

private:
    std::vector<DeviceMacState> states_;
};

struct SlotRecord {
    std::size_t event_index = 0;
    std::vector<std::size_t> active_set;
    PatternMatrix actions;
    bool xi = false;
    std::vector<int> rewards;
    std::vector<std::optional<double>> per_agent_loss;  // aligned with active_set
    double epsilon = 0.0;                               // mean over active agents
    std::optional<double> mse_sys;
    std::size_t alarm_resamples = 0;
};

/// Everything one simulation run owns.
struct World {
    Deployment deployment;
    std::vector<std::unique_ptr<Agent>> agents;  // one per device
    MacStates mac;
    Rng env_rng;
    std::size_t next_event = 0;
};

/// Fresh deployment and agents for run `run_index` of `config`.
World make_world(const RunConfig& config, std::size_t run_index);

/// Stream seeds for run `run_index`: the environment stream depends only on
/// (seed, run), so every agent kind faces the same alarms and channels.
std::uint64_t environment_seed(std::uint64_t master, std::size_t run_index);
std::uint64_t agent_seed(std::uint64_t master, std::size_t run_index, std::size_t device);

/// One alarm slot through the five MAC phases.
SlotRecord run_slot(World& world, const RunConfig& config);

struct MetricsSeries {
    std::vector<std::uint8_t> success;
    std::vector<double> rolling_success;  // trailing conv_window mean
    std::vector<std::optional<double>> mse_sys;
    std::vector<double> epsilon;
    std::vector<std::size_t> n_active;
    std::optional<std::size_t> convergence_event;
    std::size_t alarm_resamples = 0;
};

struct RunOutcome {
    std::size_t run_id = 0;
    MetricsSeries series;
    std::optional<double> success_rate;  // absent when the run did not converge
};

struct Summary {
    std::size_t runs = 0;
    std::size_t converged_runs = 0;
    double mean_success_rate = 0.0;  // over converged runs
    double ci95_low = 0.0;
    double ci95_high = 0.0;
    std::optional<double> mean_convergence_event;
    double converged_fraction = 0.0;
    std::size_t alarm_resamples = 0;
};

/// Observer invoked after every slot (run index, record); used by tests.
using SlotObserver = std::function<void(std::size_t, const SlotRecord&)>;

RunOutcome run_single(const RunConfig& config, std::size_t run_index,
                      const SlotObserver& observer = {});

struct ExperimentResult {
    RunConfig config;
    std::vector<RunOutcome> runs;  // ordered by run index
    Summary summary;
};

/// Throws ConfigError when the configuration is invalid.
ExperimentResult run_experiment(const RunConfig& config, std::size_t jobs = 1);

/// Earliest t >= 2*window where the mean over [t-window, t) differs from the
/// mean over [t-2*window, t-window) by less than tol.
std::optional<std::size_t> detect_convergence(std::span<const double> series, std::size_t window,
                                              double tol);
std::optional<std::size_t> detect_convergence(std::span<const std::uint8_t> bits,
                                              std::size_t window, double tol);

/// Mean success over the final eval_window events; absent unless converged.
std::optional<double> success_rate_post_convergence(const MetricsSeries& series,
                                                    std::size_t eval_window);

/// Recomputes convergence and post-convergence success from success bits.
RunOutcome outcome_from_bits(std::size_t run_id, std::vector<std::uint8_t> bits,
                             const RunConfig& config);

Summary summarize(std::span<const RunOutcome> runs);

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// A base configuration plus axes to cross. Cells are expanded with the
/// axes in insertion order (first axis slowest) and the agent axis last.
struct SweepGrid {
    RunConfig base;
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;

    std::vector<RunConfig> cells() const;
};

struct SweepRow {
    RunConfig cell;
    ExperimentResult result;
};

std::vector<SweepRow> sweep(const SweepGrid& grid, std::size_t jobs = 1);

/// Applies one key=value setting; returns an error message on failure.
std::optional<std::string> apply_setting(RunConfig& config, const std::string& key,
                                         const std::string& value);

/// Runs fn(0..n-1) on up to `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace alarm_sim
