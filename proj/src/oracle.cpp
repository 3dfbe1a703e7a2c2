#include "alarm_sim/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "alarm_sim/env_model.hpp"

namespace alarm_sim {

namespace {

// Neumaier compensated sum in extended precision.
class CompensatedSum {
public:
    void add(long double x) {
        const long double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    long double value() const { return sum_ + comp_; }

private:
    long double sum_ = 0.0L;
    long double comp_ = 0.0L;
};

// Subsets of {0..n-1} as bitmasks, by increasing popcount then lexicographic.
std::vector<std::uint32_t> ordered_subsets(std::size_t n) {
    std::vector<std::uint32_t> masks(std::size_t{1} << n);
    for (std::uint32_t i = 0; i < masks.size(); ++i) masks[i] = i;
    std::stable_sort(masks.begin(), masks.end(), [](std::uint32_t a, std::uint32_t b) {
        const int pa = std::popcount(a);
        const int pb = std::popcount(b);
        if (pa != pb) return pa < pb;
        // Lexicographic on the ascending member list.
        while (a != 0 && b != 0) {
            const int la = std::countr_zero(a);
            const int lb = std::countr_zero(b);
            if (la != lb) return la < lb;
            a &= a - 1;
            b &= b - 1;
        }
        return false;
    });
    return masks;
}

}  // namespace

void StaticPolicyMatrix::validate() const {
    if (channels < 1 || channels > 16) throw std::invalid_argument("channels must be in [1, 16]");
    if (activation.size() != probs.size()) {
        throw std::invalid_argument("activation vector and policy rows differ in length");
    }
    const std::size_t n_patterns = std::size_t{1} << channels;
    for (std::size_t v = 0; v < probs.size(); ++v) {
        if (probs[v].size() != n_patterns) {
            throw std::invalid_argument(fmt::format("policy row {} has {} entries, expected {}", v,
                                                    probs[v].size(), n_patterns));
        }
        double sum = 0.0;
        for (double p : probs[v]) {
            if (!(p >= 0.0 && p <= 1.0)) {
                throw std::invalid_argument(fmt::format("policy row {} has entry outside [0,1]", v));
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw std::invalid_argument(fmt::format("policy row {} sums to {}", v, sum));
        }
        if (!(activation[v] >= 0.0 && activation[v] <= 1.0)) {
            throw std::invalid_argument(fmt::format("activation {} outside [0,1]", v));
        }
    }
}

StaticPolicyMatrix StaticPolicyMatrix::uniform(std::size_t n_devices, unsigned channels,
                                               std::vector<double> activation) {
    const std::size_t n_patterns = std::size_t{1} << channels;
    StaticPolicyMatrix p;
    p.channels = channels;
    p.probs.assign(n_devices, std::vector<double>(n_patterns, 1.0 / static_cast<double>(n_patterns)));
    p.activation = std::move(activation);
    return p;
}

EnumerationBudgetExceeded::EnumerationBudgetExceeded(long double terms, std::uint64_t budget)
    : std::runtime_error(fmt::format("exact enumeration needs {:.0f} terms, budget is {}",
                                     static_cast<double>(terms), budget)),
      terms_(terms) {}

long double enumeration_terms(std::size_t n_devices, unsigned channels) {
    return std::pow(1.0L + std::ldexp(1.0L, static_cast<int>(channels)),
                    static_cast<long double>(n_devices));
}

double exact_success_prob(const StaticPolicyMatrix& policy, const OracleOptions& options) {
    policy.validate();
    const std::size_t n = policy.n_devices();
    const long double terms = enumeration_terms(n, policy.channels);
    if (n > options.max_devices || terms > static_cast<long double>(options.term_budget)) {
        throw EnumerationBudgetExceeded(terms, options.term_budget);
    }

    const std::uint32_t n_patterns = 1U << policy.channels;
    CompensatedSum lambda;
    std::vector<std::size_t> members;
    std::vector<std::uint32_t> digits;
    PatternMatrix a;
    a.channels = policy.channels;

    for (std::uint32_t mask : ordered_subsets(n)) {
        if (mask == 0) continue;  // nobody active: no success
        members.clear();
        long double g1 = 1.0L;
        for (std::size_t v = 0; v < n; ++v) {
            if (mask & (1U << v)) {
                members.push_back(v);
                g1 *= policy.activation[v];
            } else {
                g1 *= 1.0L - policy.activation[v];
            }
        }
        if (g1 == 0.0L) continue;

        // Odometer over all joint assignments of patterns to the members.
        const std::size_t k = members.size();
        digits.assign(k, 0);
        a.columns.assign(k, TransmissionPattern{0, policy.channels});
        CompensatedSum g3;
        for (;;) {
            long double weight = 1.0L;
            for (std::size_t i = 0; i < k; ++i) {
                weight *= policy.probs[members[i]][digits[i]];
                a.columns[i].index = digits[i];
            }
            if (weight != 0.0L && success_indicator(a)) g3.add(weight);

            std::size_t pos = 0;
            while (pos < k && ++digits[pos] == n_patterns) digits[pos++] = 0;
            if (pos == k) break;
        }
        lambda.add(g1 * g3.value());
    }
    return static_cast<double>(std::clamp(lambda.value(), 0.0L, 1.0L));
}

double binomial_std_error(double p, std::size_t trials) {
    if (trials == 0) return 0.0;
    return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

McEstimate mc_success_rate(const StaticPolicyMatrix& policy, std::size_t trials, Rng& rng) {
    policy.validate();
    if (trials == 0) throw std::invalid_argument("trials must be >= 1");

    // Per-device cumulative distributions for inverse-CDF pattern draws.
    std::vector<std::vector<double>> cdf(policy.n_devices());
    for (std::size_t v = 0; v < policy.n_devices(); ++v) {
        double acc = 0.0;
        for (double p : policy.probs[v]) cdf[v].push_back(acc += p);
    }

    McEstimate est;
    est.trials = trials;
    PatternMatrix a;
    a.channels = policy.channels;
    for (std::size_t t = 0; t < trials; ++t) {
        a.columns.clear();
        for (std::size_t v = 0; v < policy.n_devices(); ++v) {
            if (!(uniform01(rng) < policy.activation[v])) continue;
            const double u = uniform01(rng) * cdf[v].back();
            // First strictly greater entry, so zero-probability patterns are never drawn.
            auto it = std::upper_bound(cdf[v].begin(), cdf[v].end(), u);
            const std::size_t idx = std::min<std::size_t>(it - cdf[v].begin(), cdf[v].size() - 1);
            a.columns.push_back(TransmissionPattern{static_cast<std::uint32_t>(idx), policy.channels});
        }
        if (success_indicator(a)) ++est.successes;
    }
    est.mean = static_cast<double>(est.successes) / static_cast<double>(trials);
    est.std_error = binomial_std_error(est.mean, trials);
    return est;
}

}  // namespace alarm_sim
