#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "mrc.hpp"
#include "prng.hpp"

namespace miracle {

// Stream id reserved for the block shuffle.
inline constexpr std::uint32_t partition_stream_id = 0xFFFFFFFFu;

/// Random split of the weight indices into B blocks of sizes differing by at
/// most one. Only (n_weights, B, root_seed) is needed to rebuild it.
struct BlockPartition {
    std::uint32_t block_count = 0;
    std::vector<std::uint32_t> block_of;              // per weight
    std::vector<std::vector<std::uint32_t>> members;  // per block, in shuffled order

    std::size_t n_weights() const noexcept { return block_of.size(); }

    friend bool operator==(const BlockPartition&, const BlockPartition&) = default;
};

/// B = ceil(C / C_loc).
inline std::uint32_t block_count_for(double coding_goal_nats, double local_goal_nats) {
    if (!(local_goal_nats > 0.0) || !(coding_goal_nats >= local_goal_nats)) {
        throw budget_error("coding goals must satisfy C >= C_loc > 0");
    }
    return static_cast<std::uint32_t>(ceil_tolerant(coding_goal_nats / local_goal_nats));
}

inline BlockPartition make_partition_with_count(std::size_t n_weights, std::uint32_t block_count,
                                                std::uint64_t root_seed) {
    if (block_count == 0) throw budget_error("make_partition: need at least one block");
    if (block_count > n_weights) throw budget_error("make_partition: more blocks than weights");
    std::vector<std::uint32_t> order(n_weights);
    std::iota(order.begin(), order.end(), 0u);
    SampleStream stream(root_seed, partition_stream_id);
    for (std::size_t i = n_weights; i > 1; --i) std::swap(order[i - 1], order[uniform_index(stream, i)]);

    BlockPartition part;
    part.block_count = block_count;
    part.block_of.resize(n_weights);
    part.members.resize(block_count);
    const std::size_t base = n_weights / block_count, extra = n_weights % block_count;
    std::size_t pos = 0;
    for (std::uint32_t b = 0; b < block_count; ++b) {
        const std::size_t size = base + (b < extra ? 1 : 0);
        for (std::size_t k = 0; k < size; ++k, ++pos) {
            part.members[b].push_back(order[pos]);
            part.block_of[order[pos]] = b;
        }
    }
    return part;
}

inline BlockPartition make_partition(std::size_t n_weights, double coding_goal_nats, double local_goal_nats,
                                     std::uint64_t root_seed) {
    return make_partition_with_count(n_weights, block_count_for(coding_goal_nats, local_goal_nats), root_seed);
}

}  // namespace miracle
