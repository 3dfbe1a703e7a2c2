#include "alarm_sim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

namespace alarm_sim {

// ---------------------------------------------------------------------------
// Configuration

AgentParams RunConfig::agent_params() const {
    AgentParams p;
    p.channels = channels;
    p.hidden_layers = hidden_layers;
    p.hidden_size = hidden_size;
    p.initial_lr = initial_lr;
    p.lr_decay = lr_decay;
    p.beta0 = beta0;
    p.batch_per_pattern = batch_per_pattern;
    p.memory_per_pattern = memory_per_pattern;
    return p;
}

std::vector<std::string> RunConfig::validate() const {
    std::vector<std::string> bad;
    if (n_devices < 1) bad.push_back("n_devices: must be >= 1");
    if (channels < 1 || channels > 16) bad.push_back("channels: must be in [1, 16]");
    if (!(lambda > 0.0)) bad.push_back("lambda: must be > 0");
    if (!(gamma > 0.0)) bad.push_back("gamma: must be > 0");
    if (!std::isfinite(rho_db)) bad.push_back("rho_db: must be finite");
    if (!(density > 0.0)) bad.push_back("density: must be > 0");
    if (hidden_size < 1) bad.push_back("hidden: hidden layer size must be >= 1");
    if (n_events < 1) bad.push_back("n_events: must be >= 1");
    if (n_runs < 1) bad.push_back("n_runs: must be >= 1");
    if (eval_window < 1) bad.push_back("eval_window: must be >= 1");
    if (conv_window < 100) bad.push_back("conv_window: must be >= 100");
    if (!(conv_tol > 0.0)) bad.push_back("conv_tol: must be > 0");
    if (!(initial_lr > 0.0)) bad.push_back("initial_lr: must be > 0");
    if (!(lr_decay >= 0.0)) bad.push_back("lr_decay: must be >= 0");
    if (!(beta0 > 0.0)) bad.push_back("beta0: must be > 0");
    if (batch_per_pattern < 1) bad.push_back("batch_per_pattern: must be >= 1");
    if (memory_per_pattern < batch_per_pattern) {
        bad.push_back("memory_per_pattern: must be >= batch_per_pattern");
    }
    if (measurement_mode != "first-attempt") {
        bad.push_back("measurement_mode: only 'first-attempt' is supported");
    }
    return bad;
}

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error([&] {
          std::string msg = "invalid configuration:";
          for (const auto& p : problems) msg += "\n  " + p;
          return msg;
      }()),
      problems_(std::move(problems)) {}

namespace {

template <typename T>
bool parse_number(const std::string& text, T& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

template <typename T>
std::optional<std::string> set_number(T& field, const std::string& key, const std::string& value) {
    T parsed{};
    if (!parse_number(value, parsed)) {
        return fmt::format("{}: cannot parse '{}' as a number", key, value);
    }
    field = parsed;
    return std::nullopt;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

}  // namespace

std::optional<std::string> apply_setting(RunConfig& c, const std::string& raw_key,
                                         const std::string& raw_value) {
    const std::string key = trim(raw_key);
    const std::string value = trim(raw_value);
    if (key == "n_devices" || key == "devices") return set_number(c.n_devices, key, value);
    if (key == "channels" || key == "m_channels") return set_number(c.channels, key, value);
    if (key == "lambda") return set_number(c.lambda, key, value);
    if (key == "gamma") return set_number(c.gamma, key, value);
    if (key == "rho_db") return set_number(c.rho_db, key, value);
    if (key == "density") return set_number(c.density, key, value);
    if (key == "n_events" || key == "events") return set_number(c.n_events, key, value);
    if (key == "n_runs" || key == "runs") return set_number(c.n_runs, key, value);
    if (key == "seed") return set_number(c.seed, key, value);
    if (key == "eval_window") return set_number(c.eval_window, key, value);
    if (key == "conv_window") return set_number(c.conv_window, key, value);
    if (key == "conv_tol") return set_number(c.conv_tol, key, value);
    if (key == "initial_lr") return set_number(c.initial_lr, key, value);
    if (key == "lr_decay") return set_number(c.lr_decay, key, value);
    if (key == "beta0") return set_number(c.beta0, key, value);
    if (key == "batch_per_pattern") return set_number(c.batch_per_pattern, key, value);
    if (key == "memory_per_pattern") return set_number(c.memory_per_pattern, key, value);
    if (key == "measurement_mode") {
        c.measurement_mode = value;
        return std::nullopt;
    }
    if (key == "agent") {
        try {
            c.agent = parse_agent_kind(value);
        } catch (const std::invalid_argument& e) {
            return fmt::format("agent: {}", e.what());
        }
        return std::nullopt;
    }
    if (key == "hidden") {
        // HxS: H hidden layers of S units each.
        const auto x = value.find('x');
        std::size_t layers = 0;
        std::size_t size = 0;
        if (x == std::string::npos || !parse_number(value.substr(0, x), layers) ||
            !parse_number(value.substr(x + 1), size)) {
            return fmt::format("hidden: expected HxS (e.g. 2x1), got '{}'", value);
        }
        c.hidden_layers = layers;
        c.hidden_size = size;
        return std::nullopt;
    }
    return fmt::format("{}: unknown key", key);
}

// ---------------------------------------------------------------------------
// MAC state machine

std::string_view to_string(DeviceMacState s) {
    switch (s) {
        case DeviceMacState::normal: return "NS";
        case DeviceMacState::emergency: return "ES";
        case DeviceMacState::quiet: return "QS";
    }
    return "?";
}

bool legal_transition(DeviceMacState from, DeviceMacState to) {
    using S = DeviceMacState;
    return (from == S::normal && (to == S::emergency || to == S::quiet)) ||
           ((from == S::emergency || from == S::quiet) && to == S::normal);
}

MacStates::MacStates(std::size_t n_devices) : states_(n_devices, DeviceMacState::normal) {}

void MacStates::transition(std::size_t device, DeviceMacState to) {
    DeviceMacState& s = states_.at(device);
    if (!legal_transition(s, to)) {
        throw std::logic_error(fmt::format("illegal MAC transition {} -> {} for device {}",
                                           to_string(s), to_string(to), device));
    }
    s = to;
}

bool MacStates::all_in(DeviceMacState s) const {
    return std::all_of(states_.begin(), states_.end(), [s](DeviceMacState x) { return x == s; });
}

// ---------------------------------------------------------------------------
// Simulation

std::uint64_t environment_seed(std::uint64_t master, std::size_t run_index) {
    return derive_seed(master, 2 * static_cast<std::uint64_t>(run_index));
}

std::uint64_t agent_seed(std::uint64_t master, std::size_t run_index, std::size_t device) {
    return derive_seed(derive_seed(master, 2 * static_cast<std::uint64_t>(run_index) + 1), device);
}

World make_world(const RunConfig& config, std::size_t run_index) {
    World w;
    w.env_rng.seed(environment_seed(config.seed, run_index));
    w.deployment = build_deployment(config.n_devices, config.density, w.env_rng);
    w.mac = MacStates(config.n_devices);
    const AgentParams params = config.agent_params();
    w.agents.reserve(config.n_devices);
    for (std::size_t d = 0; d < config.n_devices; ++d) {
        w.agents.push_back(make_agent(config.agent, params, agent_seed(config.seed, run_index, d)));
    }
    return w;
}

SlotRecord run_slot(World& world, const RunConfig& config) {
    using S = DeviceMacState;
    SlotRecord rec;
    rec.event_index = world.next_event++;

    const AlarmEvent event = sample_alarm(world.deployment, config.lambda, world.env_rng);
    rec.active_set = event.active_set;
    rec.alarm_resamples = event.resample_count;
    const std::size_t n_active = event.active_set.size();

    // Phase 1: devices that detected the alarm enter ES.
    std::vector<bool> is_active(config.n_devices, false);
    for (std::size_t d : event.active_set) {
        is_active[d] = true;
        world.mac.transition(d, S::emergency);
    }

    // Phase 2: pilots go up; inactive devices sense busy channels and go quiet.
    const ChannelRealization chan =
        sample_channels(world.deployment, config.channels, config.gamma, world.env_rng);
    const PilotSet pilots = sample_pilots(n_active, config.channels, world.env_rng);
    const bool channels_busy = n_active > 0;
    for (std::size_t d = 0; d < config.n_devices; ++d) {
        if (!is_active[d] && channels_busy) world.mac.transition(d, S::quiet);
    }

    // Phase 3a: context broadcast.
    const auto contexts = generate_contexts(event, chan, pilots, config.rho(), world.env_rng);

    // Phase 3b: only ES devices pick a pattern and transmit.
    rec.actions.channels = config.channels;
    rec.actions.columns.reserve(n_active);
    double eps_sum = 0.0;
    for (std::size_t k = 0; k < n_active; ++k) {
        const std::size_t d = event.active_set[k];
        if (world.mac.at(d) != S::emergency) throw std::logic_error("non-ES device transmitting");
        Agent& agent = *world.agents[d];
        eps_sum += agent.epsilon();
        rec.actions.columns.push_back(
            TransmissionPattern{agent.act(contexts[k].values), config.channels});
    }
    rec.epsilon = n_active > 0 ? eps_sum / static_cast<double>(n_active) : 0.0;

    // Phase 4: shared ACK / no-ACK, then online learning.
    rec.xi = success_indicator(rec.actions);
    rec.rewards = reward(rec.xi, n_active);
    rec.per_agent_loss.resize(n_active);
    double loss_sum = 0.0;
    std::size_t trained = 0;
    for (std::size_t k = 0; k < n_active; ++k) {
        Agent& agent = *world.agents[event.active_set[k]];
        const LearnOutcome out =
            agent.learn(contexts[k].values, rec.actions.columns[k].index, rec.rewards[k],
                        rec.event_index);
        rec.per_agent_loss[k] = out.loss;
        if (out.loss) {
            loss_sum += *out.loss;
            ++trained;
        }
    }
    if (trained > 0) rec.mse_sys = loss_sum / static_cast<double>(trained);

    // Phase 5: everyone back to NS; the alarm message is dropped after this
    // single attempt.
    for (std::size_t d = 0; d < config.n_devices; ++d) {
        if (world.mac.at(d) != S::normal) world.mac.transition(d, S::normal);
    }
    return rec;
}

std::optional<std::size_t> detect_convergence(std::span<const double> series, std::size_t window,
                                              double tol) {
    if (window < 100) throw std::invalid_argument("convergence window must be >= 100");
    if (series.size() < 2 * window) return std::nullopt;
    std::vector<double> prefix(series.size() + 1, 0.0);
    for (std::size_t i = 0; i < series.size(); ++i) prefix[i + 1] = prefix[i] + series[i];
    const double w = static_cast<double>(window);
    for (std::size_t t = 2 * window; t <= series.size(); ++t) {
        const double older = (prefix[t - window] - prefix[t - 2 * window]) / w;
        const double recent = (prefix[t] - prefix[t - window]) / w;
        if (std::abs(recent - older) < tol) return t;
    }
    return std::nullopt;
}

std::optional<std::size_t> detect_convergence(std::span<const std::uint8_t> bits,
                                              std::size_t window, double tol) {
    std::vector<double> series(bits.begin(), bits.end());
    return detect_convergence(series, window, tol);
}

std::optional<double> success_rate_post_convergence(const MetricsSeries& series,
                                                    std::size_t eval_window) {
    if (!series.convergence_event || series.success.empty()) return std::nullopt;
    const std::size_t n = std::min(eval_window, series.success.size());
    std::size_t hits = 0;
    for (std::size_t i = series.success.size() - n; i < series.success.size(); ++i) {
        hits += series.success[i];
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

namespace {

std::vector<double> trailing_mean(std::span<const std::uint8_t> bits, std::size_t window) {
    std::vector<double> out(bits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        sum += bits[i];
        if (i >= window) sum -= bits[i - window];
        out[i] = sum / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

}  // namespace

RunOutcome outcome_from_bits(std::size_t run_id, std::vector<std::uint8_t> bits,
                             const RunConfig& config) {
    RunOutcome out;
    out.run_id = run_id;
    out.series.success = std::move(bits);
    out.series.rolling_success = trailing_mean(out.series.success, config.conv_window);
    out.series.convergence_event =
        detect_convergence(std::span<const std::uint8_t>(out.series.success), config.conv_window,
                           config.conv_tol);
    out.success_rate = success_rate_post_convergence(out.series, config.eval_window);
    return out;
}

RunOutcome run_single(const RunConfig& config, std::size_t run_index,
                      const SlotObserver& observer) {
    World world = make_world(config, run_index);
    MetricsSeries m;
    m.success.reserve(config.n_events);
    m.mse_sys.reserve(config.n_events);
    m.epsilon.reserve(config.n_events);
    m.n_active.reserve(config.n_events);
    for (std::size_t e = 0; e < config.n_events; ++e) {
        const SlotRecord rec = run_slot(world, config);
        m.success.push_back(rec.xi ? 1 : 0);
        m.mse_sys.push_back(rec.mse_sys);
        m.epsilon.push_back(rec.epsilon);
        m.n_active.push_back(rec.active_set.size());
        m.alarm_resamples += rec.alarm_resamples;
        if (observer) observer(run_index, rec);
    }
    RunOutcome out = outcome_from_bits(run_index, std::move(m.success), config);
    m.success = std::move(out.series.success);
    m.rolling_success = std::move(out.series.rolling_success);
    m.convergence_event = out.series.convergence_event;
    out.series = std::move(m);
    return out;
}

Summary summarize(std::span<const RunOutcome> runs) {
    Summary s;
    s.runs = runs.size();
    std::vector<double> rates;
    double conv_sum = 0.0;
    for (const auto& r : runs) {
        s.alarm_resamples += r.series.alarm_resamples;
        if (r.success_rate) {
            rates.push_back(*r.success_rate);
            conv_sum += static_cast<double>(*r.series.convergence_event);
        }
    }
    s.converged_runs = rates.size();
    s.converged_fraction =
        s.runs > 0 ? static_cast<double>(s.converged_runs) / static_cast<double>(s.runs) : 0.0;
    if (rates.empty()) return s;

    const double n = static_cast<double>(rates.size());
    double sum = 0.0;
    for (double r : rates) sum += r;
    s.mean_success_rate = sum / n;
    double ss = 0.0;
    for (double r : rates) ss += (r - s.mean_success_rate) * (r - s.mean_success_rate);
    const double sd = rates.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const double half = 1.96 * sd / std::sqrt(n);
    s.ci95_low = s.mean_success_rate - half;
    s.ci95_high = s.mean_success_rate + half;
    s.mean_convergence_event = conv_sum / n;
    return s;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (std::size_t j = 0; j < jobs; ++j) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
}

ExperimentResult run_experiment(const RunConfig& config, std::size_t jobs) {
    if (auto problems = config.validate(); !problems.empty()) throw ConfigError(std::move(problems));
    ExperimentResult res;
    res.config = config;
    res.runs.resize(config.n_runs);
    parallel_for(config.n_runs, jobs, [&](std::size_t i) { res.runs[i] = run_single(config, i); });
    res.summary = summarize(res.runs);
    return res;
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<RunConfig> SweepGrid::cells() const {
    std::vector<std::pair<std::string, std::vector<std::string>>> ordered;
    const std::pair<std::string, std::vector<std::string>>* agent_axis = nullptr;
    for (const auto& axis : axes) {
        if (axis.second.empty()) throw ConfigError({fmt::format("grid.{}: empty axis", axis.first)});
        if (axis.first == "agent") {
            agent_axis = &axis;
        } else {
            ordered.push_back(axis);
        }
    }
    if (agent_axis) ordered.push_back(*agent_axis);

    std::size_t total = 1;
    for (const auto& axis : ordered) total *= axis.second.size();

    std::vector<RunConfig> out;
    std::vector<std::string> problems;
    for (std::size_t cell = 0; cell < total; ++cell) {
        RunConfig c = base;
        // Mixed-radix decomposition, last axis fastest.
        std::size_t rest = cell;
        std::vector<std::size_t> idx(ordered.size());
        for (std::size_t a = ordered.size(); a-- > 0;) {
            idx[a] = rest % ordered[a].second.size();
            rest /= ordered[a].second.size();
        }
        for (std::size_t a = 0; a < ordered.size(); ++a) {
            if (auto err = apply_setting(c, ordered[a].first, ordered[a].second[idx[a]])) {
                problems.push_back("grid." + *err);
            }
        }
        for (auto& p : c.validate()) problems.push_back(p);
        out.push_back(c);
    }
    if (!problems.empty()) {
        std::sort(problems.begin(), problems.end());
        problems.erase(std::unique(problems.begin(), problems.end()), problems.end());
        throw ConfigError(std::move(problems));
    }
    return out;
}

std::vector<SweepRow> sweep(const SweepGrid& grid, std::size_t jobs) {
    const auto cells = grid.cells();
    if (cells.empty()) throw ConfigError({"grid: no cells"});

    std::vector<SweepRow> rows(cells.size());
    std::vector<std::pair<std::size_t, std::size_t>> tasks;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        rows[c].cell = cells[c];
        rows[c].result.config = cells[c];
        rows[c].result.runs.resize(cells[c].n_runs);
        for (std::size_t r = 0; r < cells[c].n_runs; ++r) tasks.emplace_back(c, r);
    }
    parallel_for(tasks.size(), jobs, [&](std::size_t t) {
        const auto [c, r] = tasks[t];
        rows[c].result.runs[r] = run_single(cells[c], r);
    });
    for (auto& row : rows) row.result.summary = summarize(row.result.runs);
    return rows;
}

}  // namespace alarm_sim
