#include "alarm_sim/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace alarm_sim {

std::string_view to_string(AgentKind kind) {
    switch (kind) {
        case AgentKind::nnbb: return "nnbb";
        case AgentKind::mab: return "mab";
        case AgentKind::mqlfa: return "mqlfa";
        case AgentKind::rs: return "rs";
    }
    return "?";
}

AgentKind parse_agent_kind(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "nnbb") return AgentKind::nnbb;
    if (lower == "mab") return AgentKind::mab;
    if (lower == "mqlfa") return AgentKind::mqlfa;
    if (lower == "rs") return AgentKind::rs;
    throw std::invalid_argument("unknown agent kind '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

EpsilonSchedule::EpsilonSchedule(double start, double step, double floor)
    : start_(start), step_(step), floor_(floor), value_(std::max(floor, start)) {
    if (!(floor >= 0.0 && start <= 1.0 && floor <= start && step >= 0.0)) {
        throw std::invalid_argument("epsilon schedule needs 0 <= floor <= start <= 1, step >= 0");
    }
}

void EpsilonSchedule::advance() {
    ++updates_;
    value_ = value_after(updates_, start_, step_, floor_);
}

double EpsilonSchedule::value_after(std::size_t k, double start, double step, double floor) {
    return std::max(floor, start - step * static_cast<double>(k));
}

std::uint32_t argmax_lowest(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("cannot select from an empty value vector");
    std::uint32_t best = 0;
    for (std::uint32_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

std::uint32_t eps_greedy_select(std::span<const double> values, double epsilon, Rng& rng) {
    if (values.empty()) throw std::invalid_argument("cannot select from an empty value vector");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon outside [0, 1]");
    const double theta = uniform01(rng);
    if (theta > epsilon) return argmax_lowest(values);
    return std::uniform_int_distribution<std::uint32_t>(
        0, static_cast<std::uint32_t>(values.size() - 1))(rng);
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be >= 1");
}

void ReplayBuffer::push(Transition t) {
    if (full()) entries_.pop_front();
    entries_.push_back(std::move(t));
}

Transition ReplayBuffer::pop_oldest() {
    if (entries_.empty()) throw std::out_of_range("replay buffer is empty");
    Transition t = std::move(entries_.front());
    entries_.pop_front();
    return t;
}

TrainBatch ReplayBuffer::sample(std::size_t n, Rng& rng) const {
    if (n > entries_.size()) throw std::invalid_argument("sample larger than buffer");
    std::vector<std::size_t> all(entries_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> picked;
    picked.reserve(n);
    std::sample(all.begin(), all.end(), std::back_inserter(picked), n, rng);
    TrainBatch batch;
    batch.inputs.reserve(n);
    batch.action_indices.reserve(n);
    batch.rewards.reserve(n);
    for (std::size_t i : picked) {
        const auto& t = entries_[i];
        batch.inputs.push_back(t.input);
        batch.action_indices.push_back(t.action);
        batch.rewards.push_back(t.reward);
    }
    return batch;
}

// ---------------------------------------------------------------------------

CVector normalize_context(std::span<const cplx> context) {
    if (context.empty()) return {};
    double min_re = context[0].real();
    double min_im = context[0].imag();
    for (const auto& v : context) {
        min_re = std::min(min_re, v.real());
        min_im = std::min(min_im, v.imag());
    }
    CVector kappa(context.size());
    double max_abs = 0.0;
    for (std::size_t m = 0; m < context.size(); ++m) {
        kappa[m] = context[m] - cplx(min_re, min_im);
        max_abs = std::max(max_abs, std::abs(kappa[m]));
    }
    if (max_abs == 0.0) return CVector(context.size(), cplx{0.0, 0.0});
    for (auto& v : kappa) v /= max_abs;
    return kappa;
}

std::vector<double> context_power_features(std::span<const cplx> context) {
    const CVector s = normalize_context(context);
    std::vector<double> out(s.size());
    for (std::size_t m = 0; m < s.size(); ++m) out[m] = std::norm(s[m]);
    return out;
}

MabState MabState::zeros(unsigned channels) {
    return MabState{std::vector<double>(pattern_count(channels), 0.0), 1.0};
}

void mab_update(MabState& state, std::uint32_t action, double reward) {
    if (action >= state.q_values.size()) throw std::out_of_range("MAB action index out of range");
    double& q = state.q_values[action];
    q = (1.0 - state.tau) * q + reward * state.tau;
}

MqlfaState MqlfaState::zeros(unsigned channels) {
    return MqlfaState{std::vector<double>(2 * std::size_t{channels}, 0.0), 1.0};
}

std::vector<double> mqlfa_features(std::span<const cplx> context, TransmissionPattern pattern) {
    if (pattern.channels != context.size()) {
        throw std::invalid_argument("pattern and context lengths differ");
    }
    std::vector<double> phi = context_power_features(context);
    for (unsigned m = 0; m < pattern.channels; ++m) phi.push_back(pattern.transmits_on(m) ? 1.0 : 0.0);
    return phi;
}

double mqlfa_q(const MqlfaState& state, std::span<const cplx> context,
               TransmissionPattern pattern) {
    const auto phi = mqlfa_features(context, pattern);
    if (phi.size() != state.theta.size()) throw std::invalid_argument("theta/feature size mismatch");
    return std::inner_product(phi.begin(), phi.end(), state.theta.begin(), 0.0);
}

void mqlfa_update(MqlfaState& state, std::span<const cplx> context, TransmissionPattern chosen,
                  double reward, double tau) {
    if (!(tau >= 0.0)) throw std::invalid_argument("tau must be >= 0");
    const auto phi = mqlfa_features(context, chosen);
    if (phi.size() != state.theta.size()) throw std::invalid_argument("theta/feature size mismatch");
    const double q = std::inner_product(phi.begin(), phi.end(), state.theta.begin(), 0.0);
    const double step = (reward - q) * tau;
    for (std::size_t i = 0; i < phi.size(); ++i) state.theta[i] += step * phi[i];
}

std::uint32_t rs_act(unsigned channels, Rng& rng) {
    return std::uniform_int_distribution<std::uint32_t>(0, pattern_count(channels) - 1)(rng);
}

double decayed_rate(double initial, double decay, std::size_t t) {
    return initial / (1.0 + decay * static_cast<double>(t));
}

// ---------------------------------------------------------------------------

namespace {

void check_context(std::span<const cplx> context, unsigned channels) {
    if (context.size() != channels) {
        throw std::invalid_argument("context has " + std::to_string(context.size()) +
                                    " entries, expected " + std::to_string(channels));
    }
}

}  // namespace

NnbbAgent::NnbbAgent(const AgentParams& params, std::uint64_t seed)
    : params_(params),
      rng_(seed),
      memory_(params.memory_size()),
      eps_(params.eps_start, params.eps_step, params.eps_floor) {
    net_ = init_net(make_layer_sizes(params.channels, params.hidden_layers, params.hidden_size,
                                     params.channels),
                    rng_);
    opt_ = RmspropState::for_net(net_, params.initial_lr);
    opt_.avg_decay = params.rmsprop_decay;
    opt_.stabilizer = params.rmsprop_stabilizer;
}

std::uint32_t NnbbAgent::act(std::span<const cplx> context) {
    check_context(context, params_.channels);
    const auto q = forward(net_, context_power_features(context));
    return eps_greedy_select(q, eps_.value(), rng_);
}

LearnOutcome NnbbAgent::learn(std::span<const cplx> context, std::uint32_t action, int reward,
                              std::size_t event_index) {
    check_context(context, params_.channels);
    LearnOutcome outcome;
    memory_.push(Transition{context_power_features(context), action, static_cast<double>(reward)});

    if (memory_.size() >= params_.batch_size()) {
        const TrainBatch batch = memory_.sample(params_.batch_size(), rng_);
        auto lg = backprop(net_, batch);
        const auto chi = clip_gradient(lg.gradient, params_.beta0);
        last_clipped_norm_ = l2_norm(chi);
        opt_.learning_rate = decayed_rate(params_.initial_lr, params_.lr_decay, event_index);
        rmsprop_step(net_, opt_, chi);
        outcome.loss = lg.loss;
        ++train_steps_;
    }
    ++activations_;
    eps_.advance();
    return outcome;
}

MabAgent::MabAgent(const AgentParams& params, std::uint64_t seed)
    : params_(params),
      rng_(seed),
      state_(MabState::zeros(params.channels)),
      eps_(params.eps_start, params.eps_step, params.eps_floor) {}

std::uint32_t MabAgent::select() { return eps_greedy_select(state_.q_values, eps_.value(), rng_); }

std::uint32_t MabAgent::act(std::span<const cplx>) { return select(); }

LearnOutcome MabAgent::learn(std::span<const cplx>, std::uint32_t action, int reward,
                             std::size_t event_index) {
    state_.tau = decayed_rate(params_.initial_lr, params_.lr_decay, event_index);
    mab_update(state_, action, static_cast<double>(reward));
    ++updates_;
    eps_.advance();
    return {};
}

MqlfaAgent::MqlfaAgent(const AgentParams& params, std::uint64_t seed)
    : params_(params),
      rng_(seed),
      state_(MqlfaState::zeros(params.channels)),
      eps_(params.eps_start, params.eps_step, params.eps_floor) {}

std::uint32_t MqlfaAgent::act(std::span<const cplx> context) {
    check_context(context, params_.channels);
    const std::uint32_t n = pattern_count(params_.channels);
    // The context part of the features is shared by every pattern.
    const auto power = context_power_features(context);
    const std::size_t m = params_.channels;
    double base = 0.0;
    for (std::size_t i = 0; i < m; ++i) base += state_.theta[i] * power[i];
    std::vector<double> q(n);
    for (std::uint32_t a = 0; a < n; ++a) {
        double v = base;
        for (std::size_t i = 0; i < m; ++i) {
            if ((a >> i) & 1U) v += state_.theta[m + i];
        }
        q[a] = v;
    }
    return eps_greedy_select(q, eps_.value(), rng_);
}

LearnOutcome MqlfaAgent::learn(std::span<const cplx> context, std::uint32_t action, int reward,
                               std::size_t event_index) {
    check_context(context, params_.channels);
    state_.tau = decayed_rate(params_.initial_lr, params_.lr_decay, event_index);
    mqlfa_update(state_, context, TransmissionPattern{action, params_.channels},
                 static_cast<double>(reward), state_.tau);
    ++updates_;
    eps_.advance();
    return {};
}

RsAgent::RsAgent(const AgentParams& params, std::uint64_t seed)
    : channels_(params.channels), rng_(seed) {}

std::uint32_t RsAgent::act(std::span<const cplx>) { return rs_act(channels_, rng_); }

std::unique_ptr<Agent> make_agent(AgentKind kind, const AgentParams& params, std::uint64_t seed) {
    switch (kind) {
        case AgentKind::nnbb: return std::make_unique<NnbbAgent>(params, seed);
        case AgentKind::mab: return std::make_unique<MabAgent>(params, seed);
        case AgentKind::mqlfa: return std::make_unique<MqlfaAgent>(params, seed);
        case AgentKind::rs: return std::make_unique<RsAgent>(params, seed);
    }
    throw std::invalid_argument("unknown agent kind");
}

}  // namespace alarm_sim
