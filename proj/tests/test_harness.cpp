#include <doctest.h>

#include <algorithm>
#include <stdexcept>
#include <cmath>
#include <numeric>

#include "alarm_sim/harness.hpp"

using namespace alarm_sim;

namespace {

RunConfig small_config(AgentKind agent) {
    RunConfig c;
    c.agent = agent;
    c.n_devices = 10;
    c.channels = 2;
    c.n_events = 600;
    c.n_runs = 2;
    c.conv_window = 100;
    c.eval_window = 200;
    c.batch_per_pattern = 10;
    c.memory_per_pattern = 30;
    return c;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("MAC transitions") {
    using S = DeviceMacState;
    CHECK(legal_transition(S::normal, S::emergency));
    CHECK(legal_transition(S::normal, S::quiet));
    CHECK(legal_transition(S::emergency, S::normal));
    CHECK(legal_transition(S::quiet, S::normal));
    CHECK_FALSE(legal_transition(S::emergency, S::quiet));
    CHECK_FALSE(legal_transition(S::quiet, S::emergency));
    CHECK_FALSE(legal_transition(S::normal, S::normal));
    MacStates mac(3);
    CHECK(mac.all_in(S::normal));
    mac.transition(0, S::emergency);
    CHECK_THROWS_AS(mac.transition(0, S::quiet), std::logic_error);
    mac.transition(0, S::normal);
    CHECK(mac.all_in(S::normal));
    CHECK(to_string(S::quiet) == "QS");
}

TEST_CASE("every slot runs the five phases consistently") {
    for (auto kind : {AgentKind::nnbb, AgentKind::mab, AgentKind::mqlfa, AgentKind::rs}) {
        const RunConfig c = small_config(kind);
        World world = make_world(c, 0);
        for (std::size_t e = 0; e < 300; ++e) {
            const SlotRecord rec = run_slot(world, c);
            CHECK(rec.event_index == e);
            CHECK(world.mac.all_in(DeviceMacState::normal));
            REQUIRE_FALSE(rec.active_set.empty());
            // Only active devices transmit.
            CHECK(rec.actions.columns.size() == rec.active_set.size());
            CHECK(rec.actions.channels == c.channels);
            CHECK(rec.xi == success_indicator(rec.actions));
            REQUIRE(rec.rewards.size() == rec.active_set.size());
            for (int r : rec.rewards) CHECK(r == static_cast<int>(rec.xi));

            double loss_sum = 0.0;
            std::size_t trained = 0;
            for (std::size_t k = 0; k < rec.active_set.size(); ++k) {
                if (rec.per_agent_loss[k]) {
                    CHECK(*rec.per_agent_loss[k] >= 0.0);
                    loss_sum += *rec.per_agent_loss[k];
                    ++trained;
                }
            }
            if (kind != AgentKind::nnbb) CHECK(trained == 0);
            CHECK(rec.mse_sys.has_value() == (trained > 0));
            if (rec.mse_sys) {
                CHECK(*rec.mse_sys >= 0.0);
                CHECK(*rec.mse_sys == doctest::Approx(loss_sum / trained));
            }
            if (kind == AgentKind::rs) CHECK(rec.epsilon == 1.0);
            CHECK((rec.epsilon >= 0.1 && rec.epsilon <= 1.0));
        }
    }
}

TEST_CASE("slot epsilon is the mean over active agents") {
    const RunConfig c = small_config(AgentKind::mab);
    World world = make_world(c, 0);
    for (int e = 0; e < 100; ++e) {
        double expected = 0.0;
        // The schedule each agent will use this slot is its value before learning.
        std::vector<double> before(c.n_devices);
        for (std::size_t d = 0; d < c.n_devices; ++d) before[d] = world.agents[d]->epsilon();
        const auto rec = run_slot(world, c);
        for (std::size_t d : rec.active_set) expected += before[d];
        CHECK(rec.epsilon == doctest::Approx(expected / rec.active_set.size()));
        for (std::size_t d = 0; d < c.n_devices; ++d) {
            const bool active = std::count(rec.active_set.begin(), rec.active_set.end(), d) > 0;
            // Inactive schedules do not advance.
            if (!active) CHECK(world.agents[d]->epsilon() == before[d]);
        }
    }
}

TEST_CASE("an all-silent slot fails and rewards nobody") {
    PatternMatrix a;
    a.channels = 3;
    a.columns.assign(4, TransmissionPattern{0, 3});
    const bool xi = success_indicator(a);
    CHECK_FALSE(xi);
    CHECK(reward(xi, 4) == std::vector<int>(4, 0));
}

TEST_CASE("mse is recorded only for NNBB") {
    for (auto kind : {AgentKind::mab, AgentKind::mqlfa, AgentKind::rs}) {
        const auto out = run_single(small_config(kind), 0);
        for (const auto& m : out.series.mse_sys) CHECK_FALSE(m.has_value());
    }
    const auto out = run_single(small_config(AgentKind::nnbb), 0);
    CHECK(std::any_of(out.series.mse_sys.begin(), out.series.mse_sys.end(),
                      [](const auto& m) { return m.has_value(); }));
}

TEST_CASE("series lengths equal the event count") {
    const RunConfig c = small_config(AgentKind::nnbb);
    const auto out = run_single(c, 1);
    CHECK(out.run_id == 1);
    CHECK(out.series.success.size() == c.n_events);
    CHECK(out.series.rolling_success.size() == c.n_events);
    CHECK(out.series.mse_sys.size() == c.n_events);
    CHECK(out.series.epsilon.size() == c.n_events);
    CHECK(out.series.n_active.size() == c.n_events);
}

TEST_CASE("rolling success is the trailing window mean") {
    const RunConfig c = small_config(AgentKind::rs);
    const auto out = run_single(c, 0);
    const auto& s = out.series.success;
    for (std::size_t i : {0UL, 50UL, 99UL, 100UL, 350UL, 599UL}) {
        const std::size_t lo = i + 1 >= c.conv_window ? i + 1 - c.conv_window : 0;
        const double sum = std::accumulate(s.begin() + lo, s.begin() + i + 1, 0.0);
        CHECK(out.series.rolling_success[i] == doctest::Approx(sum / (i + 1 - lo)));
    }
}

TEST_CASE("runs are reproducible and independent of the worker count") {
    RunConfig c = small_config(AgentKind::nnbb);
    c.n_runs = 3;
    const auto a = run_experiment(c, 1);
    const auto b = run_experiment(c, 3);
    REQUIRE(a.runs.size() == 3);
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(a.runs[r].series.success == b.runs[r].series.success);
        CHECK(a.runs[r].series.mse_sys == b.runs[r].series.mse_sys);
        CHECK(a.runs[r].series.epsilon == b.runs[r].series.epsilon);
    }
    CHECK(a.runs[0].series.success != a.runs[1].series.success);
    c.seed = 2;
    CHECK(run_experiment(c).runs[0].series.success != a.runs[0].series.success);
}

TEST_CASE("agent kinds face the same alarms") {
    std::vector<std::vector<std::size_t>> active;
    for (auto kind : {AgentKind::nnbb, AgentKind::rs}) {
        active.push_back(run_single(small_config(kind), 0).series.n_active);
    }
    CHECK(active[0] == active[1]);
}

TEST_CASE("random selection with two always-active devices on two channels") {
    RunConfig c;
    c.agent = AgentKind::rs;
    c.n_devices = 2;
    c.channels = 2;
    c.lambda = 1e6;
    c.n_events = 40000;
    c.n_runs = 1;
    const auto out = run_single(c, 0);
    for (std::size_t n : out.series.n_active) CHECK(n == 2);
    const double rate = std::accumulate(out.series.success.begin(), out.series.success.end(), 0.0) /
                        static_cast<double>(c.n_events);
    const double se = std::sqrt(0.75 * 0.25 / static_cast<double>(c.n_events));
    CHECK(std::abs(rate - 0.75) <= 3.0 * se);
}

TEST_CASE("convergence detection") {
    const std::vector<double> constant(5000, 0.4);
    CHECK(detect_convergence(constant, 1000, 0.01) == 2000u);
    std::vector<double> ramp(5000);
    // Slope 2e-5 per event: window means differ by 0.02 > tol.
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 2e-5 * static_cast<double>(i);
    CHECK_FALSE(detect_convergence(ramp, 1000, 0.01).has_value());
    CHECK_FALSE(detect_convergence(std::vector<double>(1999, 1.0), 1000, 0.01).has_value());
    CHECK_THROWS_AS(detect_convergence(constant, 99, 0.01), std::invalid_argument);
    // Step at 1000: the older window holds 3000 - t zeros, so drift < 0.01 from t = 2991.
    std::vector<double> step(6000, 0.0);
    std::fill(step.begin() + 1000, step.end(), 1.0);
    CHECK(detect_convergence(step, 1000, 0.01) == 2991u);
}

TEST_CASE("random selection converges within three windows") {
    RunConfig c;
    c.agent = AgentKind::rs;
    c.n_events = 5000;
    for (std::size_t run = 0; run < 5; ++run) {
        const auto out = run_single(c, run);
        REQUIRE(out.series.convergence_event.has_value());
        CHECK(*out.series.convergence_event <= 3 * c.conv_window);
    }
}

TEST_CASE("post-convergence success rate") {
    MetricsSeries s;
    s.success.assign(3000, 1);
    s.convergence_event = 2000;
    CHECK(success_rate_post_convergence(s, 2000) == 1.0);
    for (std::size_t i = 0; i < s.success.size(); ++i) s.success[i] = i % 2;
    CHECK(success_rate_post_convergence(s, 2000) == 0.5);
    std::fill(s.success.begin(), s.success.end(), 0);
    std::fill(s.success.end() - 37, s.success.end(), 1);
    CHECK(success_rate_post_convergence(s, 2000) == doctest::Approx(37.0 / 2000.0));
    s.convergence_event.reset();
    CHECK_FALSE(success_rate_post_convergence(s, 2000).has_value());
}

TEST_CASE("summary statistics") {
    std::vector<RunOutcome> runs(4);
    const double rates[] = {0.5, 0.6, 0.7};
    for (std::size_t i = 0; i < 3; ++i) {
        runs[i].success_rate = rates[i];
        runs[i].series.convergence_event = 1000 * (i + 2);
    }
    const auto s = summarize(runs);
    CHECK(s.runs == 4);
    CHECK(s.converged_runs == 3);
    CHECK(s.converged_fraction == doctest::Approx(0.75));
    CHECK(s.mean_success_rate == doctest::Approx(0.6));
    // sd = 0.1, half width = 1.96 * 0.1 / sqrt(3)
    CHECK(s.ci95_high - s.mean_success_rate == doctest::Approx(0.113161).epsilon(1e-5));
    CHECK(s.mean_success_rate - s.ci95_low == doctest::Approx(0.113161).epsilon(1e-5));
    CHECK(*s.mean_convergence_event == doctest::Approx(3000.0));
    const auto none = summarize(std::vector<RunOutcome>(2));
    CHECK(none.converged_runs == 0);
    CHECK_FALSE(none.mean_convergence_event.has_value());
}

TEST_CASE("configuration validation lists every bad field") {
    RunConfig c;
    c.n_devices = 0;
    c.lambda = -1.0;
    c.conv_window = 10;
    c.measurement_mode = "retransmit";
    const auto problems = c.validate();
    CHECK(problems.size() == 4);
    try {
        run_experiment(c);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.problems().size() == 4);
        CHECK(std::string(e.what()).find("lambda") != std::string::npos);
    }
    CHECK(RunConfig{}.validate().empty());
}

TEST_CASE("defaults follow the simulation table") {
    const RunConfig c;
    CHECK(c.density == 0.2);
    CHECK(c.gamma == 3.8);
    CHECK(c.lambda == 3.0);
    CHECK(c.hidden_layers == 2);
    CHECK(c.hidden_size == 1);
    CHECK(c.n_runs == 100);
    CHECK(c.initial_lr == 1.0);
    CHECK(c.beta0 == 5.0);
    const auto p = c.agent_params();
    CHECK(p.batch_size() == 30u << c.channels);
    CHECK(p.memory_size() == 100u << c.channels);
}

TEST_CASE("settings") {
    RunConfig c;
    CHECK_FALSE(apply_setting(c, "hidden", "1x10"));
    CHECK(c.hidden_layers == 1);
    CHECK(c.hidden_size == 10);
    CHECK_FALSE(apply_setting(c, " devices ", " 40 "));
    CHECK(c.n_devices == 40);
    CHECK_FALSE(apply_setting(c, "agent", "mqlfa"));
    CHECK(c.agent == AgentKind::mqlfa);
    CHECK(apply_setting(c, "hidden", "10").has_value());
    CHECK(apply_setting(c, "n_devices", "4.5").has_value());
    CHECK(apply_setting(c, "agent", "ppo").has_value());
    CHECK(apply_setting(c, "colour", "red").has_value());
}

TEST_CASE("sweep cells are config-major with the agent axis last") {
    SweepGrid g;
    g.axes = {{"agent", {"nnbb", "mab", "mqlfa", "rs"}}, {"n_devices", {"10", "20"}}};
    const auto cells = g.cells();
    REQUIRE(cells.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(cells[i].n_devices == (i < 4 ? 10u : 20u));
        CHECK(cells[i].agent == static_cast<AgentKind>(i % 4));
    }
    SweepGrid bad;
    bad.axes = {{"channels", {"2", "zero"}}};
    CHECK_THROWS_AS(bad.cells(), ConfigError);
}

TEST_CASE("sweep rows follow the cell order") {
    SweepGrid g;
    g.base = small_config(AgentKind::rs);
    g.base.n_runs = 1;
    g.base.n_events = 200;
    g.axes = {{"channels", {"1", "2"}}, {"agent", {"mab", "rs"}}};
    const auto rows = sweep(g, 2);
    REQUIRE(rows.size() == 4);
    CHECK(rows[1].cell.agent == AgentKind::rs);
    CHECK(rows[2].cell.channels == 2);
    for (const auto& r : rows) CHECK(r.result.runs.size() == 1);
}

TEST_CASE("larger lambda activates more devices") {
    SweepGrid g;
    g.base = small_config(AgentKind::rs);
    g.base.n_devices = 20;
    g.base.n_runs = 1;
    g.base.n_events = 2000;
    g.axes = {{"lambda", {"1", "4"}}};
    const auto rows = sweep(g);
    const auto mean_active = [](const SweepRow& r) {
        const auto& n = r.result.runs[0].series.n_active;
        return std::accumulate(n.begin(), n.end(), 0.0) / static_cast<double>(n.size());
    };
    CHECK(mean_active(rows[1]) > mean_active(rows[0]));
}

TEST_CASE("NNBB system error decreases over a run") {
    RunConfig c;
    c.n_devices = 20;
    c.channels = 4;
    c.n_events = 5000;
    for (std::size_t run = 0; run < 2; ++run) {
        const auto out = run_single(c, run);
        std::vector<double> trace;
        for (const auto& m : out.series.mse_sys) {
            if (m) trace.push_back(*m);
        }
        const std::size_t decile = trace.size() / 10;
        REQUIRE(decile > 10);
        for (double v : trace) CHECK(v >= 0.0);
        const std::vector<double> first(trace.begin(), trace.begin() + decile);
        const std::vector<double> last(trace.end() - decile, trace.end());
        CHECK(median(last) < median(first));
    }
}

TEST_CASE("parallel_for visits each index once and rethrows failures") {
    std::vector<int> hits(100, 0);
    parallel_for(100, 4, [&](std::size_t i) { ++hits[i]; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                        if (i == 7) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
}
