#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "alarm_sim/rng.hpp"

namespace alarm_sim {

/// Fully connected action-value network: ReLU hidden layers, linear output.
///
/// Parameters live in one flat vector. For the layer mapping l_k inputs to
/// l_{k+1} outputs, the block is the row-major weight matrix (l_{k+1} x l_k)
/// followed by the l_{k+1} biases.
class TinyNet {
public:
    TinyNet() = default;
    explicit TinyNet(std::vector<std::size_t> layer_sizes);

    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    std::size_t input_dim() const { return sizes_.front(); }
    std::size_t output_dim() const { return sizes_.back(); }
    std::size_t layer_count() const { return sizes_.size() - 1; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
    std::size_t bias_offset(std::size_t layer) const {
        return offsets_[layer] + sizes_[layer + 1] * sizes_[layer];
    }
    /// Index of the layer that owns flat parameter `p`.
    std::size_t layer_of_param(std::size_t p) const;

private:
    std::vector<std::size_t> sizes_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

std::size_t parameter_count(std::span<const std::size_t> layer_sizes);

/// Layer shape [input_dim, h, ..., h (H times), 2^M].
std::vector<std::size_t> make_layer_sizes(std::size_t input_dim, std::size_t hidden_layers,
                                          std::size_t hidden_size, unsigned channels);

struct TrainBatch {
    std::vector<std::vector<double>> inputs;
    std::vector<std::uint32_t> action_indices;
    std::vector<double> rewards;

    std::size_t size() const { return inputs.size(); }
};

struct RmspropState {
    std::vector<double> squared_grad_avg;
    double avg_decay = 0.9;
    double stabilizer = 1e-8;
    double learning_rate = 1.0;

    static RmspropState for_net(const TinyNet& net, double learning_rate);
};

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};

/// Glorot-uniform weights, zero biases.
TinyNet init_net(const std::vector<std::size_t>& layer_sizes, Rng& rng);

std::vector<double> forward(const TinyNet& net, std::span<const double> x);

/// Mean squared error between the reward and the chosen action's output.
double masked_loss(const TinyNet& net, const TrainBatch& batch);

/// Exact gradient of masked_loss with respect to every parameter.
LossAndGradient backprop(const TinyNet& net, const TrainBatch& batch);

/// Rescales `grad` so its Euclidean norm does not exceed beta0.
std::vector<double> clip_gradient(std::span<const double> grad, double beta0);

double l2_norm(std::span<const double> v);

void rmsprop_step(TinyNet& net, RmspropState& state, std::span<const double> clipped);

/// Arithmetic-operation counts for one NNBB decision with l = [M, 1, 1, 2^M].
struct ComplexityBounds {
    std::uint64_t per_pass = 0;  // one forward pass
    std::uint64_t lower = 0;
    std::uint64_t upper = 0;
};

std::uint64_t forward_pass_ops(std::span<const std::size_t> layer_sizes);
ComplexityBounds complexity_bounds(unsigned channels, std::uint64_t batch_size);
/// Closed form of the lower bound for batch size 30 * 2^M.
std::uint64_t complexity_lower_closed_form(unsigned channels);

// Finite-difference verification of backprop.

struct GradCheckReport {
    std::size_t trials = 0;
    double max_rel_error = 0.0;
    std::size_t worst_trial = 0;
    std::size_t worst_layer = 0;
    std::size_t worst_param = 0;
    double tolerance = 1e-4;

    bool passed() const { return max_rel_error < tolerance; }
};

/// Hook applied to the analytic gradient before comparison (test fixtures use
/// it to inject faults).
using GradientHook = std::function<void(std::vector<double>&)>;

/// Central differences, step `step`, on random nets l = [M, 1, 1, 2^M] with
/// M drawn from [1, 4] and random small batches.
GradCheckReport gradient_check(std::size_t trials, Rng& rng, const GradientHook& hook = {},
                               double step = 1e-5);

/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6)
double gradient_relative_error(double analytic, double numeric);

}  // namespace alarm_sim
