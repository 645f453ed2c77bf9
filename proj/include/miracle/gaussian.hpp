#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "errors.hpp"
#include "prng.hpp"

namespace miracle {

inline constexpr double min_log_std = -23.0;
inline constexpr double max_log_std = 10.0;
inline constexpr double half_log_two_pi = 0.91893853320467274178;  // 0.5 * log(2*pi)
inline constexpr double bits_per_nat = std::numbers::log2e;

constexpr double clamp_log_std(double s) noexcept { return std::clamp(s, min_log_std, max_log_std); }

constexpr double nats_to_bits(double nats) noexcept { return nats * bits_per_nat; }
constexpr double bits_to_nats(double bits) noexcept { return bits * std::numbers::ln2; }

/// Product of independent normals N(mean_i, exp(log_std_i)^2). Used both for
/// the variational distribution over weights and for the encoding
/// distribution shared with the decoder.
class DiagonalGaussian {
public:
    DiagonalGaussian(std::vector<double> mean, std::vector<double> log_std)
        : mean_(std::move(mean)), log_std_(std::move(log_std)) {
        require_same_dim(mean_.size(), log_std_.size(), "DiagonalGaussian");
        if (mean_.empty()) throw dimension_error("DiagonalGaussian: dimension must be >= 1");
        for (double& s : log_std_) s = clamp_log_std(s);
    }

    // Isotropic helper: every coordinate N(mean, std^2).
    static DiagonalGaussian isotropic(std::size_t d, double mean, double std) {
        return {std::vector<double>(d, mean), std::vector<double>(d, std::log(std))};
    }

    std::size_t dim() const noexcept { return mean_.size(); }
    std::span<const double> mean() const noexcept { return mean_; }
    std::span<const double> log_std() const noexcept { return log_std_; }
    double mean(std::size_t i) const noexcept { return mean_[i]; }
    double log_std(std::size_t i) const noexcept { return log_std_[i]; }
    double std_dev(std::size_t i) const noexcept { return std::exp(log_std_[i]); }

    friend bool operator==(const DiagonalGaussian&, const DiagonalGaussian&) = default;

private:
    std::vector<double> mean_;
    std::vector<double> log_std_;
};

inline double log_density(const DiagonalGaussian& g, std::span<const double> w) {
    require_same_dim(g.dim(), w.size(), "log_density");
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double s = g.log_std(i);
        const double z = (w[i] - g.mean(i)) * std::exp(-s);
        total += -s - half_log_two_pi - 0.5 * z * z;
    }
    return total;
}

// Per-coordinate KL(N(mq, sq^2) || N(mp, sp^2)) in nats, from log-stds.
inline double kl_coordinate(double mean_q, double log_std_q, double mean_p, double log_std_p) noexcept {
    const double var_ratio = std::exp(2.0 * (log_std_q - log_std_p));
    const double diff = (mean_q - mean_p) * std::exp(-log_std_p);
    return (log_std_p - log_std_q) + 0.5 * (var_ratio + diff * diff) - 0.5;
}

inline double kl_divergence(const DiagonalGaussian& q, const DiagonalGaussian& p) {
    require_same_dim(q.dim(), p.dim(), "kl_divergence");
    double total = 0.0;
    for (std::size_t i = 0; i < q.dim(); ++i) {
        total += kl_coordinate(q.mean(i), q.log_std(i), p.mean(i), p.log_std(i));
    }
    return total;
}

/// mu + sigma * z with z the next d standard normals of the stream
/// (consumes exactly 2d uniforms).
inline std::vector<double> sample_from(const DiagonalGaussian& g, SampleStream& stream) {
    std::vector<double> w(g.dim());
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = g.mean(i) + g.std_dev(i) * standard_normal(stream);
    }
    return w;
}

struct MonteCarloEstimate {
    double mean = 0.0;
    double sample_std = 0.0;
    double std_error = 0.0;
    std::uint64_t n = 0;
};

// Averages log q(w) - log p(w) over w ~ q drawn from stream (seed, block 0).
inline MonteCarloEstimate kl_monte_carlo_stats(const DiagonalGaussian& q, const DiagonalGaussian& p,
                                               std::uint64_t n_samples, std::uint64_t seed) {
    require_same_dim(q.dim(), p.dim(), "kl_monte_carlo");
    if (n_samples == 0) throw error("kl_monte_carlo: n_samples must be >= 1");
    SampleStream stream(seed, 0);
    std::vector<double> w(q.dim());
    // Welford
    double mean = 0.0, m2 = 0.0;
    for (std::uint64_t k = 0; k < n_samples; ++k) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = q.mean(i) + q.std_dev(i) * standard_normal(stream);
        const double term = log_density(q, w) - log_density(p, w);
        const double delta = term - mean;
        mean += delta / static_cast<double>(k + 1);
        m2 += delta * (term - mean);
    }
    MonteCarloEstimate est;
    est.n = n_samples;
    est.mean = mean;
    est.sample_std = n_samples > 1 ? std::sqrt(m2 / static_cast<double>(n_samples - 1)) : 0.0;
    est.std_error = est.sample_std / std::sqrt(static_cast<double>(n_samples));
    return est;
}

inline double kl_monte_carlo(const DiagonalGaussian& q, const DiagonalGaussian& p, std::uint64_t n_samples,
                             std::uint64_t seed) {
    return kl_monte_carlo_stats(q, p, n_samples, seed).mean;
}

}  // namespace miracle
