#include "alarm_sim/tiny_net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace alarm_sim {

namespace {

void check_batch(const TinyNet& net, const TrainBatch& batch) {
    if (batch.size() == 0) throw std::invalid_argument("training batch is empty");
    if (batch.action_indices.size() != batch.size() || batch.rewards.size() != batch.size()) {
        throw std::invalid_argument("batch inputs, actions and rewards differ in length");
    }
    for (std::size_t j = 0; j < batch.size(); ++j) {
        if (batch.inputs[j].size() != net.input_dim()) {
            throw std::invalid_argument("batch input dimension mismatch");
        }
        if (batch.action_indices[j] >= net.output_dim()) {
            throw std::invalid_argument("batch action index out of range");
        }
    }
}

// Activations of every layer (post-ReLU for hidden layers, raw for output).
std::vector<std::vector<double>> forward_trace(const TinyNet& net, std::span<const double> x) {
    const auto& sizes = net.layer_sizes();
    const auto& w = net.params();
    std::vector<std::vector<double>> acts;
    acts.reserve(sizes.size());
    acts.emplace_back(x.begin(), x.end());
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
        const std::size_t in = sizes[k];
        const std::size_t out = sizes[k + 1];
        const double* weights = w.data() + net.weight_offset(k);
        const double* bias = w.data() + net.bias_offset(k);
        const auto& prev = acts.back();
        std::vector<double> next(out);
        for (std::size_t o = 0; o < out; ++o) {
            double z = bias[o];
            for (std::size_t i = 0; i < in; ++i) z += weights[o * in + i] * prev[i];
            const bool hidden = k + 1 < net.layer_count();
            next[o] = hidden ? std::max(z, 0.0) : z;
        }
        acts.push_back(std::move(next));
    }
    return acts;
}

}  // namespace

TinyNet::TinyNet(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("network needs at least two layers");
    for (std::size_t s : sizes_) {
        if (s == 0) throw std::invalid_argument("layer sizes must be >= 1");
    }
    std::size_t offset = 0;
    for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
        offsets_.push_back(offset);
        offset += sizes_[k + 1] * (sizes_[k] + 1);
    }
    params_.assign(offset, 0.0);
}

std::size_t TinyNet::layer_of_param(std::size_t p) const {
    if (p >= params_.size()) throw std::out_of_range("parameter index out of range");
    std::size_t layer = 0;
    while (layer + 1 < offsets_.size() && p >= offsets_[layer + 1]) ++layer;
    return layer;
}

std::size_t parameter_count(std::span<const std::size_t> layer_sizes) {
    std::size_t n = 0;
    for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
        n += layer_sizes[k + 1] * (layer_sizes[k] + 1);
    }
    return n;
}

std::vector<std::size_t> make_layer_sizes(std::size_t input_dim, std::size_t hidden_layers,
                                          std::size_t hidden_size, unsigned channels) {
    std::vector<std::size_t> sizes{input_dim};
    for (std::size_t h = 0; h < hidden_layers; ++h) sizes.push_back(hidden_size);
    sizes.push_back(std::size_t{1} << channels);
    return sizes;
}

RmspropState RmspropState::for_net(const TinyNet& net, double learning_rate) {
    RmspropState s;
    s.squared_grad_avg.assign(net.params().size(), 0.0);
    s.learning_rate = learning_rate;
    return s;
}

TinyNet init_net(const std::vector<std::size_t>& layer_sizes, Rng& rng) {
    TinyNet net(layer_sizes);
    auto& w = net.params();
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
        const std::size_t in = layer_sizes[k];
        const std::size_t out = layer_sizes[k + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        const std::size_t base = net.weight_offset(k);
        for (std::size_t i = 0; i < in * out; ++i) w[base + i] = dist(rng);
    }
    return net;
}

std::vector<double> forward(const TinyNet& net, std::span<const double> x) {
    if (x.size() != net.input_dim()) {
        throw std::invalid_argument("input has " + std::to_string(x.size()) +
                                    " entries, network expects " +
                                    std::to_string(net.input_dim()));
    }
    return forward_trace(net, x).back();
}

double masked_loss(const TinyNet& net, const TrainBatch& batch) {
    check_batch(net, batch);
    double sum = 0.0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto q = forward(net, batch.inputs[j]);
        const double residual = batch.rewards[j] - q[batch.action_indices[j]];
        sum += residual * residual;
    }
    return sum / static_cast<double>(batch.size());
}

LossAndGradient backprop(const TinyNet& net, const TrainBatch& batch) {
    check_batch(net, batch);
    const auto& sizes = net.layer_sizes();
    const auto& w = net.params();
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    LossAndGradient out;
    out.gradient.assign(w.size(), 0.0);
    auto& g = out.gradient;

    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto acts = forward_trace(net, batch.inputs[j]);
        const std::uint32_t chosen = batch.action_indices[j];
        const double residual = acts.back()[chosen] - batch.rewards[j];
        out.loss += residual * residual * inv_b;

        // Only the chosen output carries error.
        std::vector<double> delta(sizes.back(), 0.0);
        delta[chosen] = 2.0 * residual * inv_b;

        for (std::size_t k = net.layer_count(); k-- > 0;) {
            const std::size_t in = sizes[k];
            const std::size_t out_n = sizes[k + 1];
            const auto& prev = acts[k];
            const double* weights = w.data() + net.weight_offset(k);
            double* gw = g.data() + net.weight_offset(k);
            double* gb = g.data() + net.bias_offset(k);
            for (std::size_t o = 0; o < out_n; ++o) {
                if (delta[o] == 0.0) continue;
                gb[o] += delta[o];
                for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += delta[o] * prev[i];
            }
            if (k == 0) break;
            std::vector<double> prev_delta(in, 0.0);
            for (std::size_t i = 0; i < in; ++i) {
                if (prev[i] <= 0.0) continue;  // ReLU gate
                double s = 0.0;
                for (std::size_t o = 0; o < out_n; ++o) s += weights[o * in + i] * delta[o];
                prev_delta[i] = s;
            }
            delta = std::move(prev_delta);
        }
    }
    return out;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::vector<double> clip_gradient(std::span<const double> grad, double beta0) {
    if (!(beta0 > 0.0)) throw std::invalid_argument("clipping threshold must be > 0");
    const double scale = beta0 / std::max(l2_norm(grad), beta0);
    std::vector<double> chi(grad.begin(), grad.end());
    for (auto& x : chi) x *= scale;
    return chi;
}

void rmsprop_step(TinyNet& net, RmspropState& state, std::span<const double> clipped) {
    auto& w = net.params();
    if (clipped.size() != w.size() || state.squared_grad_avg.size() != w.size()) {
        throw std::invalid_argument("RMSProp shape mismatch");
    }
    const double d = state.avg_decay;
    for (std::size_t i = 0; i < w.size(); ++i) {
        double& avg = state.squared_grad_avg[i];
        avg = d * avg + (1.0 - d) * clipped[i] * clipped[i];
        w[i] -= state.learning_rate * clipped[i] / (std::sqrt(avg) + state.stabilizer);
    }
}

std::uint64_t forward_pass_ops(std::span<const std::size_t> layer_sizes) {
    std::uint64_t ops = 0;
    for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
        ops += static_cast<std::uint64_t>(layer_sizes[k + 1]) * (2 * layer_sizes[k] + 1);
    }
    return ops;
}

ComplexityBounds complexity_bounds(unsigned channels, std::uint64_t batch_size) {
    if (channels < 1 || channels > 24) throw std::invalid_argument("channels must be in [1, 24]");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    const auto sizes = make_layer_sizes(channels, 2, 1, channels);
    ComplexityBounds c;
    c.per_pass = forward_pass_ops(sizes);
    // Action values, training over the batch, and the cheapest selection branch.
    c.lower = (batch_size + 1) * c.per_pass + 3;
    c.upper = c.lower + (std::uint64_t{1} << channels) - 1;
    return c;
}

std::uint64_t complexity_lower_closed_form(unsigned channels) {
    const std::uint64_t two_m = std::uint64_t{1} << channels;
    return 90 * two_m * two_m + (123 + 60 * std::uint64_t{channels}) * two_m +
           2 * std::uint64_t{channels} + 7;
}

double gradient_relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradient_check(std::size_t trials, Rng& rng, const GradientHook& hook,
                               double step) {
    GradCheckReport report;
    report.trials = trials;
    std::uniform_int_distribution<unsigned> channels_dist(1, 4);
    std::uniform_int_distribution<std::size_t> batch_dist(1, 8);
    std::uniform_real_distribution<double> bias_dist(-0.5, 0.5);

    for (std::size_t t = 0; t < trials; ++t) {
        const unsigned m = channels_dist(rng);
        const auto sizes = make_layer_sizes(m, 2, 1, m);

        TinyNet net;
        TrainBatch batch;
        // Redraw until no hidden pre-activation sits within a few steps of the
        // ReLU kink, where central differences are not meaningful.
        for (;;) {
            net = init_net(sizes, rng);
            for (std::size_t k = 0; k < net.layer_count(); ++k) {
                for (std::size_t o = 0; o < sizes[k + 1]; ++o) {
                    net.params()[net.bias_offset(k) + o] = bias_dist(rng);
                }
            }
            batch = TrainBatch{};
            const std::size_t b = batch_dist(rng);
            for (std::size_t j = 0; j < b; ++j) {
                std::vector<double> x(m);
                for (auto& v : x) v = uniform01(rng);
                batch.inputs.push_back(std::move(x));
                batch.action_indices.push_back(
                    std::uniform_int_distribution<std::uint32_t>(0, (1U << m) - 1)(rng));
                batch.rewards.push_back(uniform01(rng) < 0.5 ? 0.0 : 1.0);
            }
            bool near_kink = false;
            for (const auto& x : batch.inputs) {
                std::vector<double> a(x);
                for (std::size_t k = 0; k + 1 < net.layer_count(); ++k) {
                    const std::size_t in = sizes[k];
                    std::vector<double> next(sizes[k + 1]);
                    for (std::size_t o = 0; o < sizes[k + 1]; ++o) {
                        double z = net.params()[net.bias_offset(k) + o];
                        for (std::size_t i = 0; i < in; ++i) {
                            z += net.params()[net.weight_offset(k) + o * in + i] * a[i];
                        }
                        if (std::abs(z) < 1e3 * step) near_kink = true;
                        next[o] = std::max(z, 0.0);
                    }
                    a = std::move(next);
                }
            }
            if (!near_kink) break;
        }

        auto analytic = backprop(net, batch).gradient;
        if (hook) hook(analytic);

        for (std::size_t p = 0; p < analytic.size(); ++p) {
            TinyNet probe = net;
            const double w0 = net.params()[p];
            probe.params()[p] = w0 + step;
            const double up = masked_loss(probe, batch);
            probe.params()[p] = w0 - step;
            const double down = masked_loss(probe, batch);
            const double numeric = (up - down) / (2.0 * step);
            const double err = gradient_relative_error(analytic[p], numeric);
            if (err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst_trial = t;
                report.worst_param = p;
                report.worst_layer = net.layer_of_param(p);
            }
        }
    }
    return report;
}

}  // namespace alarm_sim
