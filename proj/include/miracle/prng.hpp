#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

// Counter-based shared random source. Encoder and decoder regenerate the
// same Gaussian sample streams from a public seed; the mix constants and the
// Box-Muller convention below are part of the compressed file format.

namespace miracle {

inline constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

constexpr std::uint64_t derive_block_seed(std::uint64_t root_seed, std::uint32_t block_id) noexcept {
    return mix64(root_seed ^ ((static_cast<std::uint64_t>(block_id) + 1) * golden_gamma));
}

// (u >> 11) * 2^-53, always in [0, 1).
constexpr double uniform64_stream(std::uint64_t seed, std::uint64_t counter) noexcept {
    const std::uint64_t u = mix64(seed + counter * golden_gamma);
    return static_cast<double>(u >> 11) * 0x1.0p-53;
}

/// cos(2*pi*u) for u in [0, 1]. u - k/4 is exact for the dyadic uniforms of
/// the stream, which leaves |x| <= pi/4 where the degree-16/17 Taylor
/// polynomials are below 1e-17 truncation error. Agrees with std::cos to
/// within a few ulp and does not depend on the platform's libm.
inline double cos_two_pi(double u) noexcept {
    const int quadrant = static_cast<int>(4.0 * u + 0.5);
    const double x = 2.0 * std::numbers::pi * (u - 0.25 * quadrant);
    const double x2 = x * x;
    double c = 1.0 / 20922789888000.0;
    c = c * x2 - 1.0 / 87178291200.0;
    c = c * x2 + 1.0 / 479001600.0;
    c = c * x2 - 1.0 / 3628800.0;
    c = c * x2 + 1.0 / 40320.0;
    c = c * x2 - 1.0 / 720.0;
    c = c * x2 + 1.0 / 24.0;
    c = c * x2 - 0.5;
    c = c * x2 + 1.0;
    double s = 1.0 / 355687428096000.0;
    s = s * x2 - 1.0 / 1307674368000.0;
    s = s * x2 + 1.0 / 6227020800.0;
    s = s * x2 - 1.0 / 39916800.0;
    s = s * x2 + 1.0 / 362880.0;
    s = s * x2 - 1.0 / 5040.0;
    s = s * x2 + 1.0 / 120.0;
    s = s * x2 - 1.0 / 6.0;
    s = s * x2 * x + x;
    const double by_quadrant[4] = {c, -s, -c, s};
    return by_quadrant[quadrant & 3];
}

// Box-Muller from two consecutive uniforms; (1 - u1) keeps the log finite.
inline double box_muller(double u1, double u2) noexcept {
    return std::sqrt(-2.0 * std::log(1.0 - u1)) * cos_two_pi(u2);
}

inline double standard_normal_at(std::uint64_t seed, std::uint64_t counter) noexcept {
    return box_muller(uniform64_stream(seed, counter), uniform64_stream(seed, counter + 1));
}

/// Position in the shared stream of one block. The k-th d-dimensional vector
/// sample starts at counter 2*d*k, so any sample is reachable without
/// generating the ones before it.
class SampleStream {
public:
    SampleStream(std::uint64_t root_seed, std::uint32_t block_id, std::uint64_t counter = 0) noexcept
        : root_seed_(root_seed),
          block_id_(block_id),
          counter_(counter),
          seed_(derive_block_seed(root_seed, block_id)) {}

    std::uint64_t root_seed() const noexcept { return root_seed_; }
    std::uint32_t block_id() const noexcept { return block_id_; }
    std::uint64_t counter() const noexcept { return counter_; }
    std::uint64_t seed() const noexcept { return seed_; }

    void seek(std::uint64_t counter) noexcept { counter_ = counter; }

    double next_uniform() noexcept { return uniform64_stream(seed_, counter_++); }

    friend bool operator==(const SampleStream& a, const SampleStream& b) noexcept {
        return a.root_seed_ == b.root_seed_ && a.block_id_ == b.block_id_ && a.counter_ == b.counter_;
    }

private:
    std::uint64_t root_seed_;
    std::uint32_t block_id_;
    std::uint64_t counter_;
    std::uint64_t seed_;
};

// Advances the stream by 2.
inline double standard_normal(SampleStream& stream) noexcept {
    const double u1 = stream.next_uniform();
    const double u2 = stream.next_uniform();
    return box_muller(u1, u2);
}

inline void fill_standard_normal(SampleStream& stream, std::span<double> out) noexcept {
    for (double& z : out) z = standard_normal(stream);
}

// Uniform integer in [0, n) from one uniform draw.
inline std::uint64_t uniform_index(SampleStream& stream, std::uint64_t n) noexcept {
    const auto k = static_cast<std::uint64_t>(stream.next_uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
}

}  // namespace miracle
