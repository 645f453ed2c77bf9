#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bit_io.hpp"
#include "byte_io.hpp"
#include "errors.hpp"
#include "gaussian.hpp"
#include "model.hpp"
#include "mrc.hpp"
#include "partition.hpp"
#include "prefix_code.hpp"

// Compressed model file. All integers little-endian, floats IEEE-754 binary64.
//
//   "MRCL"             4 bytes
//   version            u8  (= 1)
//   flags              u8  (bit 0: GRS section present)
//   root_seed          u64
//   n_sizes            u8, then n_sizes x u16 layer sizes
//   activation         u8  (0 tanh, 1 relu)
//   task               u8  (0 classification, 1 regression)
//   per layer          u8 hashed; if 1: bucket_count u32, hash_seed u64
//   per layer          f64 log-std of the encoding distribution
//   n_weights          u32
//   block_count        u32
//   k_bits             u8
//   payload            block_count indices of k_bits each, MSB-first, zero-padded
//   [GRS section]      count u32, bit length u32, Elias-delta codes MSB-first

namespace miracle {

inline constexpr std::uint8_t format_version = 1;
inline constexpr std::uint8_t flag_grs_section = 0x01;

struct CompressedModel {
    std::uint64_t root_seed = 0;
    ModelSpec spec;
    std::vector<double> p_log_std;  // per layer
    std::uint32_t n_weights = 0;
    std::uint32_t block_count = 0;
    std::uint8_t k_bits = 0;
    std::vector<std::uint64_t> indices;  // by block id
    bool has_grs_section = false;
    std::vector<std::uint64_t> grs_indices;  // 1-based accepted iterations

    friend bool operator==(const CompressedModel&, const CompressedModel&) = default;
};

inline std::size_t payload_bytes(const CompressedModel& m) {
    return (static_cast<std::size_t>(m.block_count) * m.k_bits + 7) / 8;
}

inline std::size_t header_bytes(const CompressedModel& m) {
    std::size_t n = 4 + 1 + 1 + 8 + 1 + 2 * m.spec.layer_sizes.size() + 1 + 1;
    for (std::size_t l = 0; l < m.spec.n_layers(); ++l) n += m.spec.layer_hash(l) ? 13 : 1;
    n += 8 * m.spec.n_layers();
    return n + 4 + 4 + 1;
}

namespace detail {
inline void validate_model(const CompressedModel& m) {
    m.spec.validate();
    if (m.spec.layer_sizes.size() > 255) throw error("format: too many layers");
    for (auto s : m.spec.layer_sizes)
        if (s > 0xFFFF) throw error("format: layer size exceeds 65535");
    if (m.p_log_std.size() != m.spec.n_layers()) throw error("format: need one encoding log-std per layer");
    if (m.n_weights != m.spec.n_weights()) throw error("format: n_weights does not match the architecture");
    if (m.indices.size() != m.block_count) throw error("format: index count differs from block count");
    if (m.k_bits > max_index_bits) throw error("format: k_bits exceeds 30");
    for (auto k : m.indices)
        if (k >= (std::uint64_t{1} << m.k_bits)) throw error("format: index does not fit in k_bits");
    if (!m.has_grs_section && !m.grs_indices.empty()) throw error("format: GRS indices without GRS flag");
}
}  // namespace detail

inline std::vector<std::uint8_t> write_model(const CompressedModel& m) {
    detail::validate_model(m);
    ByteWriter w;
    w.tag("MRCL");
    w.u8(format_version);
    w.u8(m.has_grs_section ? flag_grs_section : 0);
    w.u64(m.root_seed);
    w.u8(static_cast<std::uint8_t>(m.spec.layer_sizes.size()));
    for (auto s : m.spec.layer_sizes) w.u16(static_cast<std::uint16_t>(s));
    w.u8(static_cast<std::uint8_t>(m.spec.activation));
    w.u8(static_cast<std::uint8_t>(m.spec.task));
    for (std::size_t l = 0; l < m.spec.n_layers(); ++l) {
        const auto& h = m.spec.layer_hash(l);
        w.u8(h ? 1 : 0);
        if (h) {
            w.u32(h->bucket_count);
            w.u64(h->hash_seed);
        }
    }
    for (double s : m.p_log_std) w.f64(s);
    w.u32(m.n_weights);
    w.u32(m.block_count);
    w.u8(m.k_bits);
    BitWriter bits;
    for (auto k : m.indices) bits.put_bits(k, m.k_bits);
    w.raw(bits.bytes());
    if (m.has_grs_section) {
        BitWriter grs;
        for (auto n : m.grs_indices) write_delta(grs, n);
        w.u32(static_cast<std::uint32_t>(m.grs_indices.size()));
        w.u32(static_cast<std::uint32_t>(grs.bit_count()));
        w.raw(grs.bytes());
    }
    return std::move(w).take();
}

inline CompressedModel read_model(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (bytes.size() < 4 || !r.tag_equals("MRCL")) throw format_error(format_errc::bad_magic, "not a compressed model");
    const auto version = r.u8();
    if (version != format_version) {
        throw format_error(format_errc::unknown_version, "version " + std::to_string(version));
    }
    const auto flags = r.u8();
    if (flags & ~flag_grs_section) throw format_error(format_errc::corrupt, "unknown header flags");
    CompressedModel m;
    m.has_grs_section = flags & flag_grs_section;
    m.root_seed = r.u64();
    const auto n_sizes = r.u8();
    if (n_sizes < 2) throw format_error(format_errc::corrupt, "fewer than two layer sizes");
    for (int i = 0; i < n_sizes; ++i) m.spec.layer_sizes.push_back(r.u16());
    const auto act = r.u8();
    const auto task = r.u8();
    if (act > 1 || task > 1) throw format_error(format_errc::corrupt, "unknown activation or task id");
    m.spec.activation = static_cast<Activation>(act);
    m.spec.task = static_cast<Task>(task);
    const std::size_t L = m.spec.n_layers();
    m.spec.hash.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        const auto hashed = r.u8();
        if (hashed > 1) throw format_error(format_errc::corrupt, "hash flag");
        if (hashed) {
            HashConfig h;
            h.bucket_count = r.u32();
            h.hash_seed = r.u64();
            m.spec.hash[l] = h;
        }
    }
    m.p_log_std.resize(L);
    for (double& s : m.p_log_std) s = r.f64();
    m.n_weights = r.u32();
    m.block_count = r.u32();
    m.k_bits = r.u8();
    if (m.k_bits > max_index_bits) throw format_error(format_errc::corrupt, "k_bits exceeds 30");
    try {
        m.spec.validate();
    } catch (const config_error& e) {
        throw format_error(format_errc::corrupt, e.what());
    }
    if (m.n_weights != m.spec.n_weights()) throw format_error(format_errc::corrupt, "n_weights mismatch");
    if (m.block_count > m.n_weights) throw format_error(format_errc::corrupt, "more blocks than weights");
    const std::size_t payload_bits = static_cast<std::size_t>(m.block_count) * m.k_bits;
    BitReader bits(r.raw((payload_bits + 7) / 8), payload_bits);
    m.indices.resize(m.block_count);
    for (auto& k : m.indices) k = bits.get_bits(m.k_bits);
    if (m.has_grs_section) {
        const auto count = r.u32();
        const auto nbits = r.u32();
        BitReader grs(r.raw((static_cast<std::size_t>(nbits) + 7) / 8), nbits);
        m.grs_indices.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) m.grs_indices.push_back(read_delta(grs));
        if (grs.remaining() != 0) throw format_error(format_errc::corrupt, "GRS section length mismatch");
    }
    if (r.remaining() != 0) throw format_error(format_errc::corrupt, "trailing bytes after model");
    return m;
}

/// Encoding distribution of one block: mean 0, the layer's shared std.
inline DiagonalGaussian block_prior(const BlockPartition& part, std::uint32_t b,
                                    std::span<const std::uint32_t> layer_of, std::span<const double> p_log_std) {
    const auto& members = part.members[b];
    std::vector<double> log_std(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) log_std[k] = p_log_std[layer_of[members[k]]];
    return {std::vector<double>(members.size(), 0.0), std::move(log_std)};
}

struct DecodedModel {
    std::vector<double> weights;              // compressed weight vector
    std::vector<std::vector<double>> layers;  // hashed layers expanded
};

/// Rebuilds the partition and streams from the header and regenerates each
/// block's sample. Uses only p and the indices.
inline DecodedModel decompress(const CompressedModel& m) {
    DecodedModel out;
    out.weights.assign(m.n_weights, 0.0);
    if (m.block_count > 0) {
        const BlockPartition part = make_partition_with_count(m.n_weights, m.block_count, m.root_seed);
        const auto layer_of = m.spec.weight_layers();
        for (std::uint32_t b = 0; b < m.block_count; ++b) {
            const DiagonalGaussian p = block_prior(part, b, layer_of, m.p_log_std);
            const auto w = decode_block(p, SampleStream(m.root_seed, b), EncodedBlock{m.indices[b], m.k_bits});
            for (std::size_t k = 0; k < w.size(); ++k) out.weights[part.members[b][k]] = w[k];
        }
    }
    out.layers = expand_hashed_weights(m.spec, out.weights);
    return out;
}

inline DecodedModel decompress(std::span<const std::uint8_t> bytes) { return decompress(read_model(bytes)); }

struct SizeReport {
    std::size_t header = 0;
    std::size_t payload = 0;
    std::size_t total = 0;
    double compression_ratio = 0.0;  // 32-bit uncompressed parameters / total
};

inline SizeReport size_report(const CompressedModel& m) {
    SizeReport s;
    s.header = header_bytes(m);
    s.payload = payload_bytes(m);
    s.total = write_model(m).size();
    s.compression_ratio = static_cast<double>(m.spec.n_full_params() * 4) / static_cast<double>(s.total);
    return s;
}

}  // namespace miracle
