#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

#include "bit_io.hpp"
#include "errors.hpp"

// Elias delta code for positive integers: the bit length of n in Elias gamma,
// then the bits of n below its leading one. |l(n)| = N + 2*floor(log2(N+1)) + 1
// with N = floor(log2 n).

namespace miracle {

inline unsigned floor_log2(std::uint64_t n) noexcept { return 63u - static_cast<unsigned>(std::countl_zero(n)); }

inline void write_gamma(BitWriter& out, std::uint64_t n) {
    const unsigned nbits = floor_log2(n);
    out.put_bits(0, nbits);
    out.put_bits(n, nbits + 1);
}

inline std::uint64_t read_gamma(BitReader& in) {
    unsigned zeros = 0;
    while (!in.get_bit()) {
        if (++zeros > 63) throw format_error(format_errc::corrupt, "gamma prefix longer than 63 bits");
    }
    return (std::uint64_t{1} << zeros) | in.get_bits(zeros);
}

inline void write_delta(BitWriter& out, std::uint64_t n) {
    if (n == 0) throw error("prefix code: n must be >= 1");
    const unsigned nbits = floor_log2(n);
    write_gamma(out, nbits + 1);
    out.put_bits(n, nbits);
}

inline std::uint64_t read_delta(BitReader& in) {
    const std::uint64_t len = read_gamma(in);
    if (len > 64) throw format_error(format_errc::corrupt, "delta length field exceeds 64");
    const auto nbits = static_cast<unsigned>(len - 1);
    return (std::uint64_t{1} << nbits) | in.get_bits(nbits);
}

inline std::size_t delta_length(std::uint64_t n) {
    if (n == 0) throw error("prefix code: n must be >= 1");
    const unsigned nbits = floor_log2(n);
    return nbits + 2 * floor_log2(nbits + 1) + 1;
}

/// Codeword of n as a '0'/'1' string.
inline std::string prefix_encode_index(std::uint64_t n) {
    BitWriter w;
    write_delta(w, n);
    std::string s;
    s.reserve(w.bit_count());
    BitReader r(w.bytes(), w.bit_count());
    while (r.remaining() > 0) s.push_back(r.get_bit() ? '1' : '0');
    return s;
}

/// Inverse of prefix_encode_index; the string must be exactly one codeword.
inline std::uint64_t prefix_decode_index(std::string_view bits) {
    BitWriter w;
    for (char c : bits) {
        if (c != '0' && c != '1') throw format_error(format_errc::corrupt, "non-binary character in codeword");
        w.put_bit(c == '1');
    }
    BitReader r(w.bytes(), w.bit_count());
    const std::uint64_t n = read_delta(r);
    if (r.remaining() != 0) throw format_error(format_errc::corrupt, "trailing bits after codeword");
    return n;
}

}  // namespace miracle
