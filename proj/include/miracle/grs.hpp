#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"
#include "prefix_code.hpp"
#include "prng.hpp"

// Greedy rejection sampling over a discrete support. Each proposal w_i ~ p is
// accepted with the largest probability that keeps the cumulative output mass
// of every element below q. The accepted iteration i* is the message.

namespace miracle {

inline constexpr std::size_t grs_max_support = std::size_t{1} << 16;
inline constexpr std::uint64_t grs_iteration_cap = 1'000'000;

class DiscreteDistribution {
public:
    explicit DiscreteDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.empty()) throw error("DiscreteDistribution: empty support");
        double total = 0.0;
        for (double v : probs_) {
            if (!(v >= 0.0)) throw error("DiscreteDistribution: negative or NaN mass");
            total += v;
        }
        if (std::abs(total - 1.0) > 1e-12) throw error("DiscreteDistribution: masses do not sum to 1");
        cdf_.resize(probs_.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < probs_.size(); ++i) cdf_[i] = (acc += probs_[i]);
    }

    // Normalizes arbitrary non-negative weights.
    static DiscreteDistribution from_weights(std::vector<double> w) {
        double total = 0.0;
        for (double v : w) total += v;
        if (!(total > 0.0)) throw error("DiscreteDistribution: weights sum to zero");
        for (double& v : w) v /= total;
        // absorb rounding in the largest entry
        double s = 0.0;
        for (double v : w) s += v;
        *std::max_element(w.begin(), w.end()) += 1.0 - s;
        return DiscreteDistribution(std::move(w));
    }

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t i) const noexcept { return probs_[i]; }
    std::span<const double> probs() const noexcept { return probs_; }

    // Inverse CDF; elements with zero mass are never returned.
    std::size_t sample(double u) const noexcept {
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        std::size_t k = it == cdf_.end() ? probs_.size() - 1 : static_cast<std::size_t>(it - cdf_.begin());
        while (probs_[k] == 0.0 && k > 0) --k;
        return k;
    }

private:
    std::vector<double> probs_;
    std::vector<double> cdf_;
};

struct GrsState {
    std::vector<double> p_cum;  // p_i(w): mass already committed to w
    double p_star = 0.0;        // p_i*: probability of having halted
    std::uint64_t iteration = 0;

    explicit GrsState(std::size_t m) : p_cum(m, 0.0) {}
};

struct GrsStepResult {
    std::optional<std::size_t> accepted;
    double beta = 0.0;  // acceptance probability of the proposal
};

// alpha_i(w) = min{q(w) - p_{i-1}(w), (1 - p*_{i-1}) p(w)}; updates the
// state in place and returns alpha_i(proposal).
inline double grs_advance(GrsState& state, const DiscreteDistribution& q, const DiscreteDistribution& p,
                          std::size_t proposal) {
    const double remaining = std::max(0.0, 1.0 - state.p_star);
    double alpha_proposal = 0.0;
    double star = 0.0;
    for (std::size_t w = 0; w < q.size(); ++w) {
        const double alpha = std::max(0.0, std::min(q[w] - state.p_cum[w], remaining * p[w]));
        if (w == proposal) alpha_proposal = alpha;
        state.p_cum[w] += alpha;
        star += state.p_cum[w];
    }
    state.p_star = star;
    ++state.iteration;
    return alpha_proposal;
}

inline GrsStepResult grs_step(GrsState& state, const DiscreteDistribution& q, const DiscreteDistribution& p,
                              std::size_t proposal_index, double accept_uniform) {
    require_same_dim(q.size(), p.size(), "grs_step");
    require_same_dim(state.p_cum.size(), q.size(), "grs_step state");
    if (proposal_index >= q.size()) throw error("grs_step: proposal index outside support");
    if (state.p_star >= 1.0) throw sampler_error("sampler exhausted");
    const double denom = (1.0 - state.p_star) * p[proposal_index];
    const double alpha = grs_advance(state, q, p, proposal_index);
    GrsStepResult r;
    r.beta = denom > 0.0 ? alpha / denom : 0.0;
    // beta == 0 never accepts, also for accept_uniform == 0
    if (r.beta > 0.0 && accept_uniform <= r.beta) r.accepted = proposal_index;
    return r;
}

inline std::size_t grs_proposal(const DiscreteDistribution& p, const SampleStream& proposals, std::uint64_t i) {
    return p.sample(uniform64_stream(proposals.seed(), proposals.counter() + i));
}

struct GrsSample {
    std::size_t element = 0;
    std::uint64_t accepted_iteration = 0;  // 1-based i*
};

/// Proposal i is the inverse-CDF draw from p at counter i of the proposal
/// stream, so a decoder holding i* and the stream recovers the element.
inline GrsSample grs_sample(const DiscreteDistribution& q, const DiscreteDistribution& p,
                            const SampleStream& proposal_stream, SampleStream accept_stream) {
    require_same_dim(q.size(), p.size(), "grs_sample");
    if (q.size() > grs_max_support) throw error("grs_sample: support larger than 2^16");
    GrsState state(q.size());
    for (std::uint64_t i = 0; i < grs_iteration_cap; ++i) {
        const std::size_t w = grs_proposal(p, proposal_stream, i);
        const GrsStepResult r = grs_step(state, q, p, w, accept_stream.next_uniform());
        if (r.accepted) return {*r.accepted, i + 1};
    }
    throw sampler_error("grs_sample: iteration cap exceeded");
}

inline std::size_t grs_decode(const DiscreteDistribution& p, const SampleStream& proposal_stream,
                              std::uint64_t accepted_iteration) {
    if (accepted_iteration == 0) throw format_error(format_errc::corrupt, "GRS index must be >= 1");
    return grs_proposal(p, proposal_stream, accepted_iteration - 1);
}

/// q(w) - p_i(w) after the deterministic recursion has run steps 0..i.
inline std::vector<double> grs_halting_defect(const DiscreteDistribution& q, const DiscreteDistribution& p,
                                              std::uint64_t i) {
    require_same_dim(q.size(), p.size(), "grs_halting_defect");
    GrsState state(q.size());
    for (std::uint64_t step = 0; step <= i; ++step) grs_advance(state, q, p, 0);
    std::vector<double> defect(q.size());
    for (std::size_t w = 0; w < q.size(); ++w) defect[w] = q[w] - state.p_cum[w];
    return defect;
}

// Exact KL(q || p) in nats for discrete distributions.
inline double kl_discrete(const DiscreteDistribution& q, const DiscreteDistribution& p) {
    require_same_dim(q.size(), p.size(), "kl_discrete");
    double kl = 0.0;
    for (std::size_t w = 0; w < q.size(); ++w) {
        if (q[w] > 0.0) kl += q[w] * std::log(q[w] / p[w]);
    }
    return kl;
}

struct GrsCodeLength {
    double mean_bits = 0.0;
    double mean_log2_index = 0.0;
    std::uint64_t trials = 0;
};

/// Mean Elias-delta length of i* over independent runs; run t uses block ids
/// 2t (proposals) and 2t+1 (acceptance) under `seed`.
inline GrsCodeLength grs_code_length_stats(const DiscreteDistribution& q, const DiscreteDistribution& p,
                                           std::uint64_t trials, std::uint64_t seed) {
    if (trials == 0) throw error("grs_expected_code_length: trials must be >= 1");
    double bits = 0.0, logs = 0.0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        const auto id = static_cast<std::uint32_t>(2 * t);
        const GrsSample s = grs_sample(q, p, SampleStream(seed, id), SampleStream(seed, id + 1));
        bits += static_cast<double>(delta_length(s.accepted_iteration));
        logs += std::log2(static_cast<double>(s.accepted_iteration));
    }
    const double n = static_cast<double>(trials);
    return {bits / n, logs / n, trials};
}

inline double grs_expected_code_length(const DiscreteDistribution& q, const DiscreteDistribution& p,
                                       std::uint64_t trials, std::uint64_t seed) {
    return grs_code_length_stats(q, p, trials, seed).mean_bits;
}

/// Mass of N(mean, std^2) in m equal-width bins on [lo, hi]; the two tails
/// are folded into the end bins.
inline DiscreteDistribution discretize_gaussian(double mean, double std, double lo, double hi, std::size_t m) {
    if (m == 0 || !(hi > lo) || !(std > 0.0)) throw error("discretize_gaussian: invalid grid");
    auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - mean) / (std * std::sqrt(2.0))); };
    std::vector<double> w(m);
    const double width = (hi - lo) / static_cast<double>(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double a = k == 0 ? 0.0 : cdf(lo + width * static_cast<double>(k));
        const double b = k + 1 == m ? 1.0 : cdf(lo + width * static_cast<double>(k + 1));
        w[k] = std::max(0.0, b - a);
    }
    return DiscreteDistribution::from_weights(std::move(w));
}

}  // namespace miracle
