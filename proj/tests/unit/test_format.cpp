#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "miracle/format.hpp"

using namespace miracle;

namespace {

std::uint64_t next_u64(SampleStream& s) {
    const std::uint64_t hi = uniform_index(s, std::uint64_t{1} << 32);
    return hi << 32 | uniform_index(s, std::uint64_t{1} << 32);
}

ModelSpec toy_spec() {
    ModelSpec s;
    s.layer_sizes = {2, 44, 40, 2};
    return s;
}

CompressedModel random_model(SampleStream& s, ModelSpec spec, std::uint32_t B, unsigned k) {
    CompressedModel m;
    m.root_seed = next_u64(s);
    m.spec = std::move(spec);
    for (std::size_t l = 0; l < m.spec.n_layers(); ++l) m.p_log_std.push_back(-3.0 + 2.0 * s.next_uniform());
    m.n_weights = static_cast<std::uint32_t>(m.spec.n_weights());
    m.block_count = B;
    m.k_bits = static_cast<std::uint8_t>(k);
    for (std::uint32_t b = 0; b < B; ++b) m.indices.push_back(uniform_index(s, std::uint64_t{1} << k));
    return m;
}

format_errc code_of(const std::vector<std::uint8_t>& bytes) {
    try {
        read_model(bytes);
    } catch (const format_error& e) {
        return e.code();
    }
    return format_errc{};
}

std::string hex(const std::vector<std::uint8_t>& b) {
    std::string s;
    char buf[4];
    for (auto x : b) {
        std::snprintf(buf, sizeof buf, "%02x", x);
        s += buf;
    }
    return s;
}

}  // namespace

TEST(Format, ToyHeaderIs61Bytes) {
    SampleStream s(1, 0);
    const auto m = random_model(s, toy_spec(), 25, 20);
    EXPECT_EQ(m.n_weights, 2014u);
    EXPECT_EQ(header_bytes(m), 61u);
    EXPECT_EQ(payload_bytes(m), 63u);
    EXPECT_EQ(write_model(m).size(), 124u);
}

TEST(Format, FiftyBlocksOfTwentyBits) {
    SampleStream s(2, 0);
    const auto m = random_model(s, toy_spec(), 50, 20);
    const auto r = size_report(m);
    EXPECT_EQ(r.payload, 125u);
    EXPECT_EQ(r.header, 61u);
    EXPECT_EQ(r.total, 186u);
    EXPECT_DOUBLE_EQ(r.compression_ratio, 2014.0 * 4.0 / 186.0);
}

TEST(Format, RoundTrip) {
    SampleStream s(3, 0);
    const auto m = random_model(s, toy_spec(), 25, 20);
    const auto bytes = write_model(m);
    EXPECT_EQ(read_model(bytes), m);
    EXPECT_EQ(write_model(read_model(bytes)), bytes);
}

TEST(Format, HeaderOnlyModel) {
    SampleStream s(4, 0);
    const auto m = random_model(s, toy_spec(), 0, 12);
    const auto bytes = write_model(m);
    EXPECT_EQ(bytes.size(), header_bytes(m));
    EXPECT_EQ(read_model(bytes), m);
    const auto d = decompress(bytes);
    EXPECT_EQ(d.weights, std::vector<double>(2014, 0.0));
}

TEST(Format, FuzzRoundTrip) {
    SampleStream s(5, 0);
    for (int t = 0; t < 100; ++t) {
        ModelSpec spec;
        const std::size_t depth = 1 + uniform_index(s, 4);
        for (std::size_t l = 0; l <= depth; ++l) spec.layer_sizes.push_back(static_cast<std::uint32_t>(1 + uniform_index(s, 300)));
        spec.activation = static_cast<Activation>(uniform_index(s, 2));
        spec.task = static_cast<Task>(uniform_index(s, 2));
        spec.hash.resize(spec.n_layers());
        for (std::size_t l = 0; l < spec.n_layers(); ++l) {
            if (uniform_index(s, 2)) {
                spec.hash[l] = HashConfig{static_cast<std::uint32_t>(1 + uniform_index(s, spec.layer_param_count(l))), next_u64(s)};
            }
        }
        const unsigned k = static_cast<unsigned>(uniform_index(s, max_index_bits + 1));
        const auto B = static_cast<std::uint32_t>(uniform_index(s, std::min<std::size_t>(spec.n_weights(), 500) + 1));
        auto m = random_model(s, spec, B, k);
        if (uniform_index(s, 2)) {
            m.has_grs_section = true;
            const std::size_t n = uniform_index(s, 40);
            for (std::size_t i = 0; i < n; ++i) m.grs_indices.push_back(1 + uniform_index(s, std::uint64_t{1} << uniform_index(s, 40)));
        }
        const auto bytes = write_model(m);
        ASSERT_EQ(read_model(bytes), m) << "model " << t;
        if (!m.has_grs_section) {
            ASSERT_EQ(bytes.size(), header_bytes(m) + payload_bytes(m));
        }
    }
}

TEST(Format, DistinctErrorCodes) {
    SampleStream s(6, 0);
    const auto good = write_model(random_model(s, toy_spec(), 25, 20));
    auto b = good;
    b[0] = 'X';
    EXPECT_EQ(code_of(b), format_errc::bad_magic);
    EXPECT_EQ(code_of({}), format_errc::bad_magic);
    b = good;
    b[4] = 2;
    EXPECT_EQ(code_of(b), format_errc::unknown_version);
    for (std::size_t cut : {std::size_t{6}, std::size_t{30}, good.size() - 1}) {
        b.assign(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
        EXPECT_EQ(code_of(b), format_errc::truncated) << cut;
    }
    b = good;
    b.push_back(0);
    EXPECT_EQ(code_of(b), format_errc::corrupt);
    b = good;
    b[5] = 0x80;  // unknown flag
    EXPECT_EQ(code_of(b), format_errc::corrupt);
    b = good;
    b[23] = 7;  // activation id
    EXPECT_EQ(code_of(b), format_errc::corrupt);
    b = good;
    b[52] ^= 0x01;  // n_weights
    EXPECT_EQ(code_of(b), format_errc::corrupt);
    b = good;
    b[60] = 31;  // k_bits
    EXPECT_EQ(code_of(b), format_errc::corrupt);
}

TEST(Format, MinimalFileBytes) {
    CompressedModel m;
    m.root_seed = 0x0102030405060708ull;
    m.spec.layer_sizes = {1, 1};
    m.p_log_std = {-1.0};
    m.n_weights = 2;
    m.block_count = 1;
    m.k_bits = 3;
    m.indices = {5};
    const auto bytes = write_model(m);
    EXPECT_EQ(hex(bytes),
              "4d52434c"          // magic
              "01"                // version
              "00"                // flags
              "0807060504030201"  // root seed
              "02" "0100" "0100"  // layer sizes
              "00" "00"           // tanh, classification
              "00"                // layer not hashed
              "000000000000f0bf"  // log-std -1.0
              "02000000"          // n_weights
              "01000000"          // block count
              "03"                // k_bits
              "a0");              // index 5 = 101
    EXPECT_EQ(header_bytes(m), 39u);
}

TEST(Format, GrsSectionBytes) {
    CompressedModel m;
    m.spec.layer_sizes = {1, 1};
    m.p_log_std = {0.0};
    m.n_weights = 2;
    m.has_grs_section = true;
    m.grs_indices = {1, 2};
    const auto bytes = write_model(m);
    // count 2, 5 bits: "1" + "0100" -> 10100000
    const std::vector<std::uint8_t> tail{2, 0, 0, 0, 5, 0, 0, 0, 0xa0};
    ASSERT_EQ(bytes.size(), header_bytes(m) + tail.size());
    EXPECT_TRUE(std::equal(tail.begin(), tail.end(), bytes.end() - 9));
    EXPECT_EQ(bytes[5], flag_grs_section);
    auto bad = bytes;
    bad[bad.size() - 5] = 6;  // bit length disagrees with the codes
    EXPECT_NE(code_of(bad), format_errc{});
}

TEST(Format, WriterRejectsInconsistentModels) {
    SampleStream s(7, 0);
    auto m = random_model(s, toy_spec(), 10, 8);
    auto bad = m;
    bad.indices[0] = 256;
    EXPECT_THROW(write_model(bad), error);
    bad = m;
    bad.n_weights = 5;
    EXPECT_THROW(write_model(bad), error);
    bad = m;
    bad.p_log_std.pop_back();
    EXPECT_THROW(write_model(bad), error);
    bad = m;
    bad.spec.layer_sizes[1] = 70000;
    bad.n_weights = static_cast<std::uint32_t>(bad.spec.n_weights());
    EXPECT_THROW(write_model(bad), error);
}

TEST(Format, BitFlipChangesExactlyOneBlock) {
    SampleStream s(8, 0);
    ModelSpec spec;
    spec.layer_sizes = {3, 8, 2};
    const auto m = random_model(s, spec, 10, 8);
    const auto bytes = write_model(m);
    const auto base = decompress(bytes).weights;
    const auto part = make_partition_with_count(m.n_weights, m.block_count, m.root_seed);
    const std::size_t h = header_bytes(m);
    for (std::size_t bit = 0; bit < 80; ++bit) {
        auto flipped = bytes;
        flipped[h + bit / 8] ^= static_cast<std::uint8_t>(0x80u >> (bit % 8));
        const auto w = decompress(flipped).weights;
        const std::uint32_t block = static_cast<std::uint32_t>(bit / 8);
        std::size_t changed = 0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] != base[i]) {
                ++changed;
                ASSERT_EQ(part.block_of[i], block) << "bit " << bit;
            }
        }
        EXPECT_EQ(changed, part.members[block].size()) << "bit " << bit;
    }
}

TEST(Format, DecodeTimeIndependentOfSampleCount) {
    SampleStream s(9, 0);
    ModelSpec spec;
    spec.layer_sizes = {64, 64, 10};
    const auto small = write_model(random_model(s, spec, 2000, 10));
    const auto large = write_model(random_model(s, spec, 2000, 20));
    auto best = [](const std::vector<std::uint8_t>& b) {
        double t = 1e30;
        for (int r = 0; r < 5; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto w = decompress(b).weights;
            t = std::min(t, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            EXPECT_EQ(w.size(), 4810u);
        }
        return t;
    };
    const double ts = best(small), tl = best(large);
    EXPECT_LT(tl, 2.0 * ts) << ts << " " << tl;
    EXPECT_LT(ts, 2.0 * tl) << ts << " " << tl;
}

TEST(Format, DecompressExpandsHashedLayers) {
    SampleStream s(10, 0);
    ModelSpec spec;
    spec.layer_sizes = {4, 5, 3};
    spec.hash = {HashConfig{7, 99}, std::nullopt};
    const auto m = random_model(s, spec, 5, 6);
    const auto d = decompress(m);
    ASSERT_EQ(d.weights.size(), 7u + 18u);
    ASSERT_EQ(d.layers.size(), 2u);
    EXPECT_EQ(d.layers[0].size(), 25u);
    for (std::size_t j = 0; j < 25; ++j) EXPECT_EQ(d.layers[0][j], d.weights[hash_bucket(*spec.hash[0], 25, j)]);
    for (std::size_t j = 0; j < 18; ++j) EXPECT_EQ(d.layers[1][j], d.weights[7 + j]);
}
