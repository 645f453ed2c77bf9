#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "adam.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "gaussian.hpp"
#include "model.hpp"
#include "mrc.hpp"
#include "partition.hpp"
#include "prng.hpp"

namespace miracle {

struct TrainConfig {
    double coding_goal_nats = bits_to_nats(500.0);  // C
    double local_goal_nats = bits_to_nats(20.0);    // C_loc
    std::uint64_t initial_iterations = 10'000;      // I0
    std::uint64_t intermediate_iterations = 50;     // I
    double eps_beta0 = 1e-8;
    double eps_beta = 5e-5;
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::uint64_t root_seed = 1;     // public: partition and sample streams
    std::uint64_t trainer_seed = 2;  // private: init, minibatches, noise, block order, selection
    double init_log_std = -5.0;      // initial log-std of q
    std::size_t log_every = 500;

    void validate() const {
        if (!(local_goal_nats > 0.0)) throw config_error("local_goal", "must be > 0");
        if (!(coding_goal_nats >= local_goal_nats)) throw config_error("coding_goal", "must be >= local_goal");
        if (!(eps_beta > 0.0)) throw config_error("eps_beta", "must be > 0");
        if (!(eps_beta0 > 0.0)) throw config_error("eps_beta0", "must be > 0");
        if (!(learning_rate > 0.0)) throw config_error("learning_rate", "must be > 0");
        if (batch_size == 0) throw config_error("batch_size", "must be >= 1");
        if (log_every == 0) throw config_error("log_every", "must be >= 1");
        if (local_goal_nats / std::numbers::ln2 > max_index_bits + 1e-9) {
            throw config_error("local_goal", "needs more than 2^30 candidate samples per block");
        }
    }
};

inline constexpr double beta_min = 1e-12;
inline constexpr double beta_max = 1e4;

/// Multiplicative beta update for open blocks: grow when the block's KL is
/// above the local goal, shrink otherwise (ties shrink).
inline void anneal_betas(std::span<double> betas, std::span<const std::uint8_t> open, std::span<const double> block_kl,
                         double local_goal_nats, double eps_beta) {
    require_same_dim(betas.size(), open.size(), "anneal_betas");
    require_same_dim(betas.size(), block_kl.size(), "anneal_betas");
    for (std::size_t b = 0; b < betas.size(); ++b) {
        if (!open[b]) continue;
        betas[b] = block_kl[b] > local_goal_nats ? betas[b] * (1.0 + eps_beta) : betas[b] / (1.0 + eps_beta);
        betas[b] = std::clamp(betas[b], beta_min, beta_max);
    }
}

/// Per-block KL(q || p) with p = N(0, exp(p_log_std[layer])^2).
inline std::vector<double> block_kls(const BlockPartition& part, std::span<const std::uint32_t> layer_of,
                                     std::span<const double> mean, std::span<const double> log_std,
                                     std::span<const double> p_log_std) {
    std::vector<double> kl(part.block_count, 0.0);
    for (std::uint32_t b = 0; b < part.block_count; ++b) {
        for (auto i : part.members[b]) {
            kl[b] += kl_coordinate(mean[i], clamp_log_std(log_std[i]), 0.0, clamp_log_std(p_log_std[layer_of[i]]));
        }
    }
    return kl;
}

// Stream ids under trainer_seed.
namespace trainer_streams {
inline constexpr std::uint32_t init = 1;
inline constexpr std::uint32_t minibatch = 2;
inline constexpr std::uint32_t noise = 3;
inline constexpr std::uint32_t block_order = 4;
inline constexpr std::uint32_t selection = 5;
}  // namespace trainer_streams

// N(0, 1/fan_in) means; encoding log-std starts at the same scale.
inline std::vector<double> initial_means(const ModelSpec& spec, std::uint64_t trainer_seed) {
    SampleStream stream(trainer_seed, trainer_streams::init);
    std::vector<double> mean;
    mean.reserve(spec.n_weights());
    for (std::size_t l = 0; l < spec.n_layers(); ++l) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(spec.layer_sizes[l]));
        for (std::size_t k = 0; k < spec.layer_weight_count(l); ++k) mean.push_back(scale * standard_normal(stream));
    }
    return mean;
}

struct TrainState {
    std::vector<double> mean;
    std::vector<double> log_std;
    std::vector<double> p_log_std;      // per layer
    std::vector<double> frozen_values;  // encoded samples of closed blocks
    std::vector<double> betas;          // per block
    std::vector<std::uint8_t> open;     // per block
    AdamState adam_mean;
    AdamState adam_log_std;
    AdamState adam_p;
    std::uint64_t step = 0;
};

struct TrainResult {
    CompressedModel model;
    std::vector<double> weights;             // encoder-side frozen sample of every block
    std::vector<double> pre_encode_kl;       // by block id, nats
    std::vector<std::uint32_t> encode_order;
    std::string log;
};

class MiracleTrainer {
public:
    MiracleTrainer(TrainConfig config, ModelSpec spec, const Dataset& train)
        : config_(std::move(config)), model_(std::move(spec)), data_(&train) {
        config_.validate();
        train.validate();
        const std::size_t n = model_.n_weights();
        partition_ = make_partition(n, config_.coding_goal_nats, config_.local_goal_nats, config_.root_seed);
        k_bits_ = required_index_bits(config_.local_goal_nats);
        layer_of_ = model_.spec().weight_layers();

        state_.mean = initial_means(model_.spec(), config_.trainer_seed);
        state_.log_std.assign(n, config_.init_log_std);
        for (std::size_t l = 0; l < model_.spec().n_layers(); ++l) {
            state_.p_log_std.push_back(-0.5 * std::log(static_cast<double>(model_.spec().layer_sizes[l])));
        }
        state_.frozen_values.assign(n, 0.0);
        state_.betas.assign(partition_.block_count, config_.eps_beta0);
        state_.open.assign(partition_.block_count, 1);
        state_.adam_mean = AdamState(n);
        state_.adam_log_std = AdamState(n);
        state_.adam_p = AdamState(state_.p_log_std.size());
        indices_.assign(partition_.block_count, 0);
        pre_encode_kl_.assign(partition_.block_count, 0.0);
        adam_.learning_rate = config_.learning_rate;
    }

    const TrainConfig& config() const noexcept { return config_; }
    const Mlp& model() const noexcept { return model_; }
    const BlockPartition& partition() const noexcept { return partition_; }
    const TrainState& state() const noexcept { return state_; }
    unsigned k_bits() const noexcept { return k_bits_; }
    bool done() const { return std::none_of(state_.open.begin(), state_.open.end(), [](auto o) { return o != 0; }); }
    const std::string& log() const noexcept { return log_; }

    std::vector<double> current_block_kls() const {
        return block_kls(partition_, layer_of_, state_.mean, state_.log_std, state_.p_log_std);
    }

    // The encoding distribution is trained only until the first block is
    // coded; after that the decoder's p must stay fixed.
    bool encoding_started() const { return !encode_order_.empty(); }

    /// One stochastic gradient step on L_O followed by the beta update.
    ElboResult variational_step() {
        std::vector<std::size_t> batch(std::min(config_.batch_size, data_->n));
        for (auto& r : batch) r = static_cast<std::size_t>(uniform_index(minibatch_stream_, data_->n));

        const auto active = active_weights(partition_.block_of, state_.open);
        std::vector<double> noise(active.size());
        fill_standard_normal(noise_stream_, noise);

        ElboProblem pb;
        pb.model = &model_;
        pb.mean = state_.mean;
        pb.log_std = state_.log_std;
        pb.frozen_values = state_.frozen_values;
        pb.p_log_std = state_.p_log_std;
        pb.block_of = partition_.block_of;
        pb.open = state_.open;
        pb.betas = state_.betas;
        pb.data = data_;
        pb.batch = batch;
        ElboResult r = elbo_and_gradients(pb, noise);

        adam_step_sparse(state_.adam_mean, state_.mean, r.active, r.grad_mean, adam_, "mean");
        adam_step_sparse(state_.adam_log_std, state_.log_std, r.active, r.grad_log_std, adam_, "log_std");
        for (auto i : r.active) state_.log_std[i] = clamp_log_std(state_.log_std[i]);
        if (!encoding_started()) {
            adam_step(state_.adam_p, state_.p_log_std, r.grad_p_log_std, adam_, "p_log_std");
            for (double& s : state_.p_log_std) s = clamp_log_std(s);
        }

        const auto kl = current_block_kls();
        anneal_betas(state_.betas, state_.open, kl, config_.local_goal_nats, config_.eps_beta);
        ++state_.step;
        if (state_.step % config_.log_every == 0) log_step(r, kl);
        return r;
    }

    void variational_updates(std::uint64_t iterations) {
        for (std::uint64_t i = 0; i < iterations; ++i) variational_step();
    }

    /// Draws a random open block, codes it and freezes its weights to the
    /// decoded sample. Returns the block id.
    std::uint32_t encode_next_block() {
        std::vector<std::uint32_t> open_ids;
        for (std::uint32_t b = 0; b < partition_.block_count; ++b)
            if (state_.open[b]) open_ids.push_back(b);
        if (open_ids.empty()) throw error("encode_next_block: all blocks are already coded");
        const std::uint32_t b = open_ids[uniform_index(order_stream_, open_ids.size())];

        const auto& members = partition_.members[b];
        std::vector<double> q_mean(members.size()), q_log_std(members.size());
        for (std::size_t k = 0; k < members.size(); ++k) {
            q_mean[k] = state_.mean[members[k]];
            q_log_std[k] = state_.log_std[members[k]];
        }
        const DiagonalGaussian q(std::move(q_mean), std::move(q_log_std));
        const DiagonalGaussian p = block_prior(partition_, b, layer_of_, state_.p_log_std);
        const double kl = kl_divergence(q, p);
        pre_encode_kl_[b] = kl;

        const auto [block, sample] = encode_block(q, p, SampleStream(config_.root_seed, b), std::uint64_t{1} << k_bits_,
                                                  selection_stream_.next_uniform());
        for (std::size_t k = 0; k < members.size(); ++k) state_.frozen_values[members[k]] = sample[k];
        state_.open[b] = 0;
        indices_[b] = block.index;
        encode_order_.push_back(b);

        char line[192];
        std::snprintf(line, sizeof line, "encode block=%u kl_nats=%.6f budget_nats=%.6f index=%llu\n", b, kl,
                      config_.local_goal_nats, static_cast<unsigned long long>(block.index));
        log_ += line;
        if (kl > config_.local_goal_nats) {
            std::snprintf(line, sizeof line, "warning block=%u kl_nats=%.6f exceeds local goal\n", b, kl);
            log_ += line;
        }
        return b;
    }

    /// I0 updates, then alternate encoding one block and I updates.
    TrainResult run() {
        variational_updates(config_.initial_iterations);
        while (!done()) {
            encode_next_block();
            if (!done()) variational_updates(config_.intermediate_iterations);
        }
        return result();
    }

    TrainResult result() const {
        if (!done()) throw error("MiracleTrainer: blocks remain to be coded");
        TrainResult r;
        r.model.root_seed = config_.root_seed;
        r.model.spec = model_.spec();
        r.model.p_log_std = state_.p_log_std;
        r.model.n_weights = static_cast<std::uint32_t>(model_.n_weights());
        r.model.block_count = partition_.block_count;
        r.model.k_bits = static_cast<std::uint8_t>(k_bits_);
        r.model.indices = indices_;
        r.weights = state_.frozen_values;
        r.pre_encode_kl = pre_encode_kl_;
        r.encode_order = encode_order_;
        r.log = log_;
        return r;
    }

private:
    void log_step(const ElboResult& r, std::span<const double> kl) {
        double kl_total = 0.0, beta_lo = beta_max, beta_hi = 0.0;
        std::size_t n_open = 0;
        for (std::size_t b = 0; b < kl.size(); ++b) {
            if (!state_.open[b]) continue;
            ++n_open;
            kl_total += kl[b];
            beta_lo = std::min(beta_lo, state_.betas[b]);
            beta_hi = std::max(beta_hi, state_.betas[b]);
        }
        char line[256];
        std::snprintf(line, sizeof line,
                      "step=%llu L_O=%.6f loglik=%.6f open=%zu kl_open_nats=%.6f beta_min=%.6g beta_max=%.6g\n",
                      static_cast<unsigned long long>(state_.step), r.objective, r.scaled_log_likelihood, n_open,
                      kl_total, n_open ? beta_lo : 0.0, beta_hi);
        log_ += line;
        std::string kls = "block_kl";
        for (std::size_t b = 0; b < kl.size(); ++b) {
            if (!state_.open[b]) continue;
            std::snprintf(line, sizeof line, " %zu:%.4f", b, kl[b]);
            kls += line;
        }
        log_ += kls + "\n";
    }

    TrainConfig config_;
    Mlp model_;
    const Dataset* data_;
    BlockPartition partition_;
    unsigned k_bits_ = 0;
    std::vector<std::uint32_t> layer_of_;
    TrainState state_;
    AdamSettings adam_;
    std::vector<std::uint64_t> indices_;
    std::vector<double> pre_encode_kl_;
    std::vector<std::uint32_t> encode_order_;
    std::string log_;
    SampleStream minibatch_stream_{config_.trainer_seed, trainer_streams::minibatch};
    SampleStream noise_stream_{config_.trainer_seed, trainer_streams::noise};
    SampleStream order_stream_{config_.trainer_seed, trainer_streams::block_order};
    SampleStream selection_stream_{config_.trainer_seed, trainer_streams::selection};
};

inline TrainResult run_miracle(const TrainConfig& config, const ModelSpec& spec, const Dataset& train) {
    return MiracleTrainer(config, spec, train).run();
}

struct Evaluation {
    double error_rate = 0.0;           // classification only
    double mean_log_likelihood = 0.0;  // nats per example
    double mean_squared_error = 0.0;   // regression only
};

inline Evaluation evaluate(const ModelSpec& spec, std::span<const double> w, const Dataset& data) {
    const Mlp model(spec);
    Evaluation e;
    if (data.n == 0) return e;
    e.mean_log_likelihood = model.log_likelihood(w, data).log_likelihood / static_cast<double>(data.n);
    const auto layers = model.expand(w);
    std::size_t wrong = 0;
    double sq = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) {
        const auto out = model.predict(layers, data.input(i));
        if (spec.task == Task::classification) {
            const auto pred = static_cast<std::uint32_t>(std::max_element(out.begin(), out.end()) - out.begin());
            if (pred != data.labels[i]) ++wrong;
        } else {
            const auto y = data.target(i);
            for (std::size_t o = 0; o < out.size(); ++o) sq += (y[o] - out[o]) * (y[o] - out[o]);
        }
    }
    const double n = static_cast<double>(data.n);
    if (spec.task == Task::classification) e.error_rate = static_cast<double>(wrong) / n;
    else e.mean_squared_error = sq / (n * static_cast<double>(spec.layer_sizes.back()));
    return e;
}

/// Deterministic maximum-likelihood training of the same architecture with
/// the same optimizer, minibatches and initialization; the uncompressed
/// reference point.
inline std::vector<double> train_baseline(const TrainConfig& config, const ModelSpec& spec, const Dataset& train,
                                          std::uint64_t steps) {
    const Mlp model(spec);
    std::vector<double> w = initial_means(spec, config.trainer_seed);
    AdamState adam(w.size());
    AdamSettings settings;
    settings.learning_rate = config.learning_rate;
    SampleStream batches(config.trainer_seed, trainer_streams::minibatch);
    std::vector<std::size_t> batch(std::min(config.batch_size, train.n));
    for (std::uint64_t s = 0; s < steps; ++s) {
        for (auto& r : batch) r = static_cast<std::size_t>(uniform_index(batches, train.n));
        auto g = model.log_likelihood(w, train, batch, true).grad;
        const double scale = static_cast<double>(train.n) / static_cast<double>(batch.size());
        for (double& x : g) x *= scale;
        adam_step(adam, w, g, settings, "baseline");
    }
    return w;
}

}  // namespace miracle
