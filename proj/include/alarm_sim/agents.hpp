#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alarm_sim/env_model.hpp"
#include "alarm_sim/rng.hpp"
#include "alarm_sim/tiny_net.hpp"

namespace alarm_sim {

enum class AgentKind { nnbb, mab, mqlfa, rs };

std::string_view to_string(AgentKind kind);
AgentKind parse_agent_kind(std::string_view name);

/// Linear decay from `start` to `floor`, one step per update.
class EpsilonSchedule {
public:
    EpsilonSchedule() = default;
    EpsilonSchedule(double start, double step, double floor);

    double value() const { return value_; }
    std::size_t updates() const { return updates_; }
    void advance();

    /// Value after k updates from `start`.
    static double value_after(std::size_t k, double start = 1.0, double step = 0.005,
                              double floor = 0.1);

private:
    double start_ = 1.0;
    double step_ = 0.005;
    double floor_ = 0.1;
    double value_ = 1.0;
    std::size_t updates_ = 0;
};

/// Argmax with probability 1 - epsilon (lowest index wins ties), otherwise a
/// uniformly random index over all entries.
std::uint32_t eps_greedy_select(std::span<const double> values, double epsilon, Rng& rng);

std::uint32_t argmax_lowest(std::span<const double> values);

struct Transition {
    std::vector<double> input;
    std::uint32_t action = 0;
    double reward = 0.0;
};

/// Bounded FIFO experience memory.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    bool full() const { return entries_.size() >= capacity_; }

    /// Appends, evicting the oldest entry first when at capacity.
    void push(Transition t);
    /// Removes and returns the oldest entry.
    Transition pop_oldest();
    const Transition& at(std::size_t i) const { return entries_.at(i); }

    /// Uniform sample of `n` distinct entries.
    TrainBatch sample(std::size_t n, Rng& rng) const;

private:
    std::size_t capacity_;
    std::deque<Transition> entries_;
};

/// Normalised context: shift real and imaginary parts to be non-negative, then
/// scale by the largest magnitude. An all-identical context maps to zero.
CVector normalize_context(std::span<const cplx> context);

/// Elementwise |s~|^2 of the normalised context; the NNBB network input.
std::vector<double> context_power_features(std::span<const cplx> context);

struct MabState {
    std::vector<double> q_values;
    double tau = 1.0;

    static MabState zeros(unsigned channels);
};

void mab_update(MabState& state, std::uint32_t action, double reward);

struct MqlfaState {
    std::vector<double> theta;  // 2M weights
    double tau = 1.0;

    static MqlfaState zeros(unsigned channels);
};

std::vector<double> mqlfa_features(std::span<const cplx> context, TransmissionPattern pattern);
double mqlfa_q(const MqlfaState& state, std::span<const cplx> context,
               TransmissionPattern pattern);
void mqlfa_update(MqlfaState& state, std::span<const cplx> context, TransmissionPattern chosen,
                  double reward, double tau);

std::uint32_t rs_act(unsigned channels, Rng& rng);

/// Learning-rate law shared by the DNN optimiser and the MAB/MQLFA step size.
double decayed_rate(double initial, double decay, std::size_t t);

struct AgentParams {
    unsigned channels = 2;
    std::size_t hidden_layers = 2;
    std::size_t hidden_size = 1;
    double initial_lr = 1.0;
    double lr_decay = 0.015;
    double beta0 = 5.0;
    double rmsprop_decay = 0.9;
    double rmsprop_stabilizer = 1e-8;
    std::size_t batch_per_pattern = 30;   // B = 30 * 2^M
    std::size_t memory_per_pattern = 100; // E = 100 * 2^M
    double eps_start = 1.0;
    double eps_step = 0.005;
    double eps_floor = 0.1;

    std::size_t batch_size() const { return batch_per_pattern << channels; }
    std::size_t memory_size() const { return memory_per_pattern << channels; }
};

struct LearnOutcome {
    std::optional<double> loss;  // present when a network training step ran
};

/// act -> (environment) -> learn, executed once per alarm event in which the
/// owning device is active. event_index counts alarm events since the start
/// of the run and drives the learning-rate decay.
class Agent {
public:
    virtual ~Agent() = default;
    virtual AgentKind kind() const = 0;
    virtual std::uint32_t act(std::span<const cplx> context) = 0;
    virtual LearnOutcome learn(std::span<const cplx> context, std::uint32_t action, int reward,
                               std::size_t event_index) = 0;
    /// Exploration probability used by the next act().
    virtual double epsilon() const = 0;
};

class NnbbAgent final : public Agent {
public:
    NnbbAgent(const AgentParams& params, std::uint64_t seed);

    AgentKind kind() const override { return AgentKind::nnbb; }
    std::uint32_t act(std::span<const cplx> context) override;
    LearnOutcome learn(std::span<const cplx> context, std::uint32_t action, int reward,
                       std::size_t event_index) override;
    double epsilon() const override { return eps_.value(); }

    const TinyNet& net() const { return net_; }
    const ReplayBuffer& memory() const { return memory_; }
    const RmspropState& optimizer() const { return opt_; }
    std::size_t activations() const { return activations_; }
    std::size_t train_steps() const { return train_steps_; }
    /// Norm of the clipped gradient fed to the optimiser on the last step.
    double last_clipped_norm() const { return last_clipped_norm_; }

private:
    AgentParams params_;
    Rng rng_;
    TinyNet net_;
    RmspropState opt_;
    ReplayBuffer memory_;
    EpsilonSchedule eps_;
    std::size_t activations_ = 0;
    std::size_t train_steps_ = 0;
    double last_clipped_norm_ = 0.0;
};

class MabAgent final : public Agent {
public:
    MabAgent(const AgentParams& params, std::uint64_t seed);

    AgentKind kind() const override { return AgentKind::mab; }
    std::uint32_t act(std::span<const cplx> context) override;
    LearnOutcome learn(std::span<const cplx> context, std::uint32_t action, int reward,
                       std::size_t event_index) override;
    double epsilon() const override { return eps_.value(); }

    /// Context-free action selection.
    std::uint32_t select();
    const MabState& state() const { return state_; }

private:
    AgentParams params_;
    Rng rng_;
    MabState state_;
    EpsilonSchedule eps_;
    std::size_t updates_ = 0;
};

class MqlfaAgent final : public Agent {
public:
    MqlfaAgent(const AgentParams& params, std::uint64_t seed);

    AgentKind kind() const override { return AgentKind::mqlfa; }
    std::uint32_t act(std::span<const cplx> context) override;
    LearnOutcome learn(std::span<const cplx> context, std::uint32_t action, int reward,
                       std::size_t event_index) override;
    double epsilon() const override { return eps_.value(); }

    const MqlfaState& state() const { return state_; }

private:
    AgentParams params_;
    Rng rng_;
    MqlfaState state_;
    EpsilonSchedule eps_;
    std::size_t updates_ = 0;
};

class RsAgent final : public Agent {
public:
    RsAgent(const AgentParams& params, std::uint64_t seed);

    AgentKind kind() const override { return AgentKind::rs; }
    std::uint32_t act(std::span<const cplx> context) override;
    LearnOutcome learn(std::span<const cplx>, std::uint32_t, int, std::size_t) override {
        return {};
    }
    double epsilon() const override { return 1.0; }

private:
    unsigned channels_;
    Rng rng_;
};

std::unique_ptr<Agent> make_agent(AgentKind kind, const AgentParams& params, std::uint64_t seed);

}  // namespace alarm_sim
