#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "errors.hpp"

namespace miracle {

// MSB-first bit writer over a byte buffer; the last byte is zero-padded.
class BitWriter {
public:
    void put_bit(bool bit) {
        if (bit_count_ % 8 == 0) bytes_.push_back(0);
        if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bit_count_ % 8));
        ++bit_count_;
    }

    // Low `width` bits of value, most significant first.
    void put_bits(std::uint64_t value, unsigned width) {
        for (unsigned i = width; i-- > 0;) put_bit((value >> i) & 1u);
    }

    std::size_t bit_count() const noexcept { return bit_count_; }
    const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
    std::vector<std::uint8_t> take() && { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t bit_count_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> bytes) noexcept : BitReader(bytes, bytes.size() * 8) {}
    BitReader(std::span<const std::uint8_t> bytes, std::size_t bit_limit) noexcept
        : bytes_(bytes), limit_(std::min(bit_limit, bytes.size() * 8)) {}

    bool get_bit() {
        if (pos_ >= limit_) throw format_error(format_errc::truncated, "bit stream exhausted");
        const bool bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
        ++pos_;
        return bit;
    }

    std::uint64_t get_bits(unsigned width) {
        std::uint64_t v = 0;
        for (unsigned i = 0; i < width; ++i) v = (v << 1) | static_cast<std::uint64_t>(get_bit());
        return v;
    }

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return limit_ - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t limit_;
    std::size_t pos_ = 0;
};

}  // namespace miracle
