#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "gaussian.hpp"
#include "prng.hpp"

// Minimal random coding: a block of weights is sent as the index of an
// importance-reweighted sample from the shared stream.

namespace miracle {

inline constexpr unsigned max_index_bits = 30;

// ceil(x) that ignores floating-point noise just above an integer, so that
// budgets like 20 bits expressed in nats round to 20 and not 21.
inline double ceil_tolerant(double x, double rel_tol = 1e-9) {
    const double r = std::round(x);
    if (std::abs(x - r) <= rel_tol * std::max(1.0, std::abs(x))) return r;
    return std::ceil(x);
}

// Index width for a KL budget: ceil((kl + slack) / ln 2) bits.
inline unsigned required_index_bits(double kl_nats, double slack_nats = 0.0) {
    if (!(kl_nats >= 0.0) || !(slack_nats >= 0.0)) throw budget_error("required_samples: negative budget");
    const double bits = ceil_tolerant((kl_nats + slack_nats) / std::numbers::ln2);
    if (bits > max_index_bits) throw budget_error("block KL exceeds feasible sample budget");
    return static_cast<unsigned>(bits);
}

/// K = 2^ceil((kl + slack) / ln 2).
inline std::uint64_t required_samples(double kl_nats, double slack_nats = 0.0) {
    return std::uint64_t{1} << required_index_bits(kl_nats, slack_nats);
}

struct EncodedBlock {
    std::uint64_t index = 0;
    unsigned k_bits = 0;

    friend bool operator==(const EncodedBlock&, const EncodedBlock&) = default;
};

inline double log_sum_exp(std::span<const double> xs) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : xs) hi = std::max(hi, x);
    if (!std::isfinite(hi)) return hi;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - hi);
    return hi + std::log(acc);
}

/// Discrete distribution over the K stream samples with mass proportional to
/// q(w_k) / p(w_k), kept in log space.
class ProxyDistribution {
public:
    explicit ProxyDistribution(std::vector<double> log_weights) : log_weights_(std::move(log_weights)) {
        if (log_weights_.empty()) throw error("ProxyDistribution: K must be >= 1");
        normalizer_ = log_sum_exp(log_weights_);
        if (!std::isfinite(normalizer_)) {
            throw numeric_error("ProxyDistribution: all importance weights are zero or non-finite");
        }
    }

    std::size_t size() const noexcept { return log_weights_.size(); }
    std::span<const double> log_weights() const noexcept { return log_weights_; }
    double normalizer() const noexcept { return normalizer_; }
    double probability(std::size_t k) const { return std::exp(log_weights_[k] - normalizer_); }

    // Inverse CDF in index order: first k whose cumulative mass exceeds u.
    std::uint64_t select(double u) const {
        double cdf = 0.0;
        std::uint64_t last_positive = 0;
        for (std::size_t k = 0; k < log_weights_.size(); ++k) {
            const double pk = probability(k);
            if (pk > 0.0) last_positive = k;
            cdf += pk;
            if (cdf > u) return k;
        }
        return last_positive;  // u above the rounded total mass
    }

private:
    std::vector<double> log_weights_;
    double normalizer_ = 0.0;
};

/// Log importance weights log q(w_k) - log p(w_k) for the K samples
/// w_k ~ p starting at the stream's current counter.
inline ProxyDistribution build_proxy(const DiagonalGaussian& q, const DiagonalGaussian& p,
                                     const SampleStream& stream, std::uint64_t K) {
    require_same_dim(q.dim(), p.dim(), "encode_block");
    if (K == 0) throw error("encode_block: K must be >= 1");
    const std::size_t d = q.dim();
    std::vector<double> p_mean(d), p_std(d), p_inv(d), q_mean(d), q_inv(d);
    double constant = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        p_mean[i] = p.mean(i);
        p_std[i] = p.std_dev(i);
        p_inv[i] = std::exp(-p.log_std(i));
        q_mean[i] = q.mean(i);
        q_inv[i] = std::exp(-q.log_std(i));
        constant += p.log_std(i) - q.log_std(i);
    }
    std::vector<double> log_w(K);
    const std::uint64_t seed = stream.seed();
    std::uint64_t counter = stream.counter();
    for (std::uint64_t k = 0; k < K; ++k) {
        double acc = constant;
        for (std::size_t i = 0; i < d; ++i, counter += 2) {
            const double z = standard_normal_at(seed, counter);
            const double w = p_mean[i] + p_std[i] * z;
            const double zq = (w - q_mean[i]) * q_inv[i];
            const double zp = (w - p_mean[i]) * p_inv[i];
            acc += 0.5 * (zp * zp - zq * zq);
        }
        log_w[k] = acc;
    }
    return ProxyDistribution(std::move(log_w));
}

/// The k-th d-dimensional sample of a block stream, by counter jump.
inline std::vector<double> stream_sample(const DiagonalGaussian& p, const SampleStream& stream, std::uint64_t k) {
    SampleStream s = stream;
    s.seek(stream.counter() + 2 * static_cast<std::uint64_t>(p.dim()) * k);
    return sample_from(p, s);
}

/// Encode one block. selection_uniform must come from encoder-private
/// randomness; the decoder never needs it. Returns the index and w_{k*}.
inline std::pair<EncodedBlock, std::vector<double>> encode_block(const DiagonalGaussian& q, const DiagonalGaussian& p,
                                                                 const SampleStream& stream, std::uint64_t K,
                                                                 double selection_uniform) {
    if (K == 0 || (K & (K - 1)) != 0) throw budget_error("encode_block: K must be a power of two");
    const ProxyDistribution proxy = build_proxy(q, p, stream, K);
    EncodedBlock block;
    block.index = proxy.select(selection_uniform);
    block.k_bits = static_cast<unsigned>(std::countr_zero(K));
    return {block, stream_sample(p, stream, block.index)};
}

/// Regenerates the encoder's sample from p, the stream and the index only.
inline std::vector<double> decode_block(const DiagonalGaussian& p, const SampleStream& stream, const EncodedBlock& block) {
    if (block.k_bits > 63 || block.index >= (std::uint64_t{1} << block.k_bits)) {
        throw format_error(format_errc::corrupt, "block index out of range for its bit width");
    }
    return stream_sample(p, stream, block.index);
}

// (e^{-t/4} + 2 sqrt(tail_prob))^{1/2}
inline double bias_bound_epsilon(double t, double tail_prob) {
    if (!(t >= 0.0)) throw error("bias_bound_epsilon: t must be >= 0");
    if (!(tail_prob >= 0.0 && tail_prob <= 1.0)) throw error("bias_bound_epsilon: tail_prob outside [0,1]");
    return std::sqrt(std::exp(-t / 4.0) + 2.0 * std::sqrt(tail_prob));
}

/// Fraction of n draws w ~ q with log q(w) - log p(w) > threshold.
inline double estimate_log_ratio_tail(const DiagonalGaussian& q, const DiagonalGaussian& p, double threshold_nats,
                                      std::uint64_t n, std::uint64_t seed) {
    require_same_dim(q.dim(), p.dim(), "estimate_log_ratio_tail");
    if (n == 0) throw error("estimate_log_ratio_tail: n must be >= 1");
    SampleStream stream(seed, 0);
    std::uint64_t hits = 0;
    for (std::uint64_t k = 0; k < n; ++k) {
        const std::vector<double> w = sample_from(q, stream);
        if (log_density(q, w) - log_density(p, w) > threshold_nats) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

struct CodingLengthBounds {
    double lower = 0.0;
    double upper = 0.0;
};

// Additive constant of the upper bound. The true O(1) term is not known
// numerically; 5 nats is a reporting convention.
inline constexpr double coding_bound_constant_nats = 5.0;

inline CodingLengthBounds coding_length_bounds(double kl_nats) {
    if (!(kl_nats >= 0.0)) throw error("coding_length_bounds: kl must be >= 0");
    return {kl_nats, kl_nats + 2.0 * std::log(kl_nats + 1.0) + coding_bound_constant_nats};
}

}  // namespace miracle
