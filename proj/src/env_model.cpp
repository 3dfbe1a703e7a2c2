#include "alarm_sim/env_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace alarm_sim {

namespace {

constexpr double kMinBsDistance = 1e-6;

Point2 uniform_in_disc(double radius, Rng& rng) {
    const double r = radius * std::sqrt(uniform01(rng));
    const double theta = 2.0 * std::numbers::pi * uniform01(rng);
    return {r * std::cos(theta), r * std::sin(theta)};
}

cplx complex_gaussian(double variance, Rng& rng) {
    std::normal_distribution<double> component(0.0, std::sqrt(variance / 2.0));
    const double re = component(rng);
    const double im = component(rng);
    return {re, im};
}

}  // namespace

double Point2::norm() const { return std::hypot(x, y); }

double Point2::distance_to(const Point2& other) const {
    return std::hypot(x - other.x, y - other.y);
}

TransmissionPattern TransmissionPattern::from_bits(std::span<const std::uint8_t> bits) {
    if (bits.empty() || bits.size() > 31) {
        throw std::invalid_argument("pattern must have between 1 and 31 channels");
    }
    TransmissionPattern p{0, static_cast<unsigned>(bits.size())};
    for (std::size_t m = 0; m < bits.size(); ++m) {
        if (bits[m] > 1) throw std::invalid_argument("pattern bits must be 0 or 1");
        p.index |= static_cast<std::uint32_t>(bits[m]) << m;
    }
    return p;
}

std::vector<std::uint8_t> TransmissionPattern::bits() const {
    std::vector<std::uint8_t> out(channels);
    for (unsigned m = 0; m < channels; ++m) out[m] = transmits_on(m) ? 1 : 0;
    return out;
}

std::uint32_t pattern_count(unsigned channels) {
    if (channels == 0 || channels > 31) {
        throw std::invalid_argument("channel count must be in [1, 31]");
    }
    return 1U << channels;
}

PatternMatrix PatternMatrix::from_rows(const std::vector<std::vector<std::uint8_t>>& rows) {
    if (rows.empty()) throw std::invalid_argument("pattern matrix needs at least one row");
    const std::size_t cols = rows.front().size();
    PatternMatrix a;
    a.channels = static_cast<unsigned>(rows.size());
    a.columns.reserve(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        std::vector<std::uint8_t> bits(rows.size());
        for (std::size_t m = 0; m < rows.size(); ++m) {
            if (rows[m].size() != cols) throw std::invalid_argument("ragged pattern matrix");
            bits[m] = rows[m][c];
        }
        a.columns.push_back(TransmissionPattern::from_bits(bits));
    }
    return a;
}

Deployment build_deployment(std::size_t n_devices, double density, Rng& rng) {
    if (n_devices == 0) throw std::invalid_argument("n_devices must be >= 1");
    if (!(density > 0.0)) throw std::invalid_argument("density must be > 0");

    Deployment dep;
    dep.n_devices = n_devices;
    dep.density = density;
    dep.region_radius = std::sqrt(static_cast<double>(n_devices) / (std::numbers::pi * density));
    dep.device_positions.reserve(n_devices);
    dep.device_bs_distances.reserve(n_devices);
    for (std::size_t i = 0; i < n_devices; ++i) {
        Point2 p = uniform_in_disc(dep.region_radius, rng);
        // r = 0 would make the path loss singular.
        while (p.norm() < kMinBsDistance) p = uniform_in_disc(dep.region_radius, rng);
        dep.device_positions.push_back(p);
        dep.device_bs_distances.push_back(p.norm());
    }
    dep.exc_position = uniform_in_disc(dep.region_radius, rng);
    return dep;
}

double activation_probability(double distance, double lambda) {
    return std::exp(-distance / lambda);
}

AlarmEvent sample_alarm(const Deployment& dep, double lambda, Rng& rng) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
    if (dep.n_devices == 0) throw std::invalid_argument("deployment has no devices");

    AlarmEvent ev;
    ev.activation_probs.resize(dep.n_devices);
    ev.epicenter_distances.resize(dep.n_devices);
    for (;;) {
        ev.epicenter = uniform_in_disc(dep.region_radius, rng);
        ev.active_set.clear();
        for (std::size_t i = 0; i < dep.n_devices; ++i) {
            const double d = ev.epicenter.distance_to(dep.device_positions[i]);
            ev.epicenter_distances[i] = d;
            ev.activation_probs[i] = activation_probability(d, lambda);
            if (uniform01(rng) < ev.activation_probs[i]) ev.active_set.push_back(i);
        }
        if (!ev.active_set.empty()) break;
        ++ev.resample_count;
    }
    return ev;
}

ChannelRealization sample_channels(const Deployment& dep, unsigned channels, double gamma,
                                   Rng& rng) {
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
    if (channels == 0) throw std::invalid_argument("channel count must be >= 1");
    ChannelRealization chan;
    chan.coefficients.reserve(dep.n_devices);
    for (double r : dep.device_bs_distances) {
        if (!(r > 0.0)) throw std::invalid_argument("device located at the BS (r = 0)");
        const double variance = std::pow(r, -gamma);
        CVector c(channels);
        for (auto& v : c) v = complex_gaussian(variance, rng);
        chan.coefficients.push_back(std::move(c));
    }
    return chan;
}

PilotSet sample_pilots(std::size_t n_active, unsigned channels, Rng& rng) {
    static const double s = 1.0 / std::numbers::sqrt2;
    static const cplx constellation[4] = {{s, s}, {-s, -s}, {s, -s}, {-s, s}};
    std::uniform_int_distribution<int> pick(0, 3);
    PilotSet set;
    set.pilots.reserve(n_active);
    for (std::size_t i = 0; i < n_active; ++i) {
        CVector p(channels);
        for (auto& v : p) v = constellation[pick(rng)];
        set.pilots.push_back(std::move(p));
    }
    return set;
}

std::vector<Context> generate_contexts(const AlarmEvent& event, const ChannelRealization& chan,
                                       const PilotSet& pilots, double rho, Rng& rng,
                                       Noise noise) {
    if (!(rho >= 0.0)) throw std::invalid_argument("rho must be >= 0");
    if (pilots.pilots.size() != event.active_set.size()) {
        throw std::invalid_argument("pilot count " + std::to_string(pilots.pilots.size()) +
                                    " does not match active set size " +
                                    std::to_string(event.active_set.size()));
    }
    if (event.active_set.empty()) return {};

    const std::size_t channels = chan.coefficients.at(event.active_set.front()).size();
    const double amp = std::sqrt(rho);

    // Uplink: aggregated pilots at the BS.
    CVector aggregate(channels);
    for (std::size_t k = 0; k < event.active_set.size(); ++k) {
        const CVector& c = chan.coefficients.at(event.active_set[k]);
        const CVector& pilot = pilots.pilots[k];
        if (c.size() != channels || pilot.size() != channels) {
            throw std::invalid_argument("channel/pilot length mismatch");
        }
        for (std::size_t m = 0; m < channels; ++m) aggregate[m] += amp * c[m] * pilot[m];
    }
    if (noise == Noise::awgn) {
        for (auto& v : aggregate) v += complex_gaussian(1.0, rng);
    }

    // Downlink: rebroadcast over the same quasi-static channel.
    std::vector<Context> out;
    out.reserve(event.active_set.size());
    for (std::size_t dev : event.active_set) {
        const CVector& c = chan.coefficients[dev];
        Context ctx{CVector(channels), dev};
        for (std::size_t m = 0; m < channels; ++m) {
            ctx.values[m] = amp * c[m] * aggregate[m];
            if (noise == Noise::awgn) ctx.values[m] += complex_gaussian(1.0, rng);
        }
        out.push_back(std::move(ctx));
    }
    return out;
}

bool success_indicator(const PatternMatrix& patterns) {
    for (unsigned m = 0; m < patterns.channels; ++m) {
        int load = 0;
        for (const auto& p : patterns.columns) {
            if (p.transmits_on(m) && ++load > 1) break;
        }
        if (load == 1) return true;
    }
    return false;
}

std::vector<int> reward(bool xi, std::size_t n_active) {
    return std::vector<int>(n_active, xi ? 1 : 0);
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace alarm_sim
