#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "alarm_sim/rng.hpp"

namespace alarm_sim {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    double norm() const;
    double distance_to(const Point2& other) const;
};

/// Devices and ExC spread uniformly over a disc centred on the BS.
struct Deployment {
    std::size_t n_devices = 0;
    double density = 0.0;        // devices per m^2
    double region_radius = 0.0;  // m
    std::vector<Point2> device_positions;
    Point2 exc_position;
    std::vector<double> device_bs_distances;  // r for every device
};

struct AlarmEvent {
    Point2 epicenter;
    std::vector<std::size_t> active_set;     // ascending device indices
    std::vector<double> activation_probs;    // per device, exp(-d / lambda)
    std::vector<double> epicenter_distances; // per device
    std::size_t resample_count = 0;          // draws rejected for an empty active set
};

/// Per-device complex channel vectors, one entry per orthogonal channel.
struct ChannelRealization {
    std::vector<CVector> coefficients;
};

/// QPSK pilot sequences, one per active device, in active-set order.
struct PilotSet {
    std::vector<CVector> pilots;
};

struct Context {
    CVector values;
    std::size_t owner = 0;
};

/// A transmission pattern: bit m of `index` set means "transmit on channel m".
/// Index 0 is silence, index 2^M - 1 transmits on every channel.
struct TransmissionPattern {
    std::uint32_t index = 0;
    unsigned channels = 0;

    static TransmissionPattern from_bits(std::span<const std::uint8_t> bits);
    std::vector<std::uint8_t> bits() const;
    bool transmits_on(unsigned channel) const { return (index >> channel) & 1U; }
};

std::uint32_t pattern_count(unsigned channels);

/// M x |N'| choice matrix, stored column-wise as one pattern per active device.
struct PatternMatrix {
    unsigned channels = 0;
    std::vector<TransmissionPattern> columns;

    /// Builds a matrix from explicit 0/1 rows (rows[m][device]).
    static PatternMatrix from_rows(const std::vector<std::vector<std::uint8_t>>& rows);
};

Deployment build_deployment(std::size_t n_devices, double density, Rng& rng);

/// Draws an epicenter and the resulting active set, redrawing both until at
/// least one device is active.
AlarmEvent sample_alarm(const Deployment& dep, double lambda, Rng& rng);

double activation_probability(double distance, double lambda);

ChannelRealization sample_channels(const Deployment& dep, unsigned channels, double gamma,
                                   Rng& rng);

PilotSet sample_pilots(std::size_t n_active, unsigned channels, Rng& rng);

enum class Noise { awgn, none };

/// Uplink pilot aggregation at the BS followed by the downlink rebroadcast.
/// Returns one context per active device, in active-set order.
std::vector<Context> generate_contexts(const AlarmEvent& event, const ChannelRealization& chan,
                                       const PilotSet& pilots, double rho, Rng& rng,
                                       Noise noise = Noise::awgn);

/// True iff at least one channel carries exactly one transmitter.
bool success_indicator(const PatternMatrix& patterns);

/// Shared ACK: every active agent receives xi.
std::vector<int> reward(bool xi, std::size_t n_active);

double db_to_linear(double db);

}  // namespace alarm_sim
