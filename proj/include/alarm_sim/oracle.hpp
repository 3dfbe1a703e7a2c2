#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "alarm_sim/rng.hpp"

namespace alarm_sim {

/// Context-free randomised access policy: row v is device v's distribution
/// over the 2^M patterns, `activation[v]` its probability of being active.
struct StaticPolicyMatrix {
    unsigned channels = 1;
    std::vector<std::vector<double>> probs;
    std::vector<double> activation;

    std::size_t n_devices() const { return probs.size(); }
    /// Throws std::invalid_argument on a malformed policy.
    void validate() const;

    static StaticPolicyMatrix uniform(std::size_t n_devices, unsigned channels,
                                      std::vector<double> activation);
};

/// Raised when exhaustive enumeration would exceed the configured term budget.
class EnumerationBudgetExceeded : public std::runtime_error {
public:
    EnumerationBudgetExceeded(long double terms, std::uint64_t budget);
    long double terms() const { return terms_; }

private:
    long double terms_;
};

struct OracleOptions {
    std::size_t max_devices = 12;
    std::uint64_t term_budget = 100'000'000;
};

/// Number of (subset, pattern assignment) terms visited: (1 + 2^M)^N.
long double enumeration_terms(std::size_t n_devices, unsigned channels);

/// Exact success probability by enumerating every active subset and every
/// joint pattern assignment of that subset.
double exact_success_prob(const StaticPolicyMatrix& policy, const OracleOptions& options = {});

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t trials = 0;
    std::size_t successes = 0;
};

McEstimate mc_success_rate(const StaticPolicyMatrix& policy, std::size_t trials, Rng& rng);

/// Binomial standard error of a rate estimated from `trials` draws.
double binomial_std_error(double p, std::size_t trials);

}  // namespace alarm_sim
