#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "gaussian.hpp"
#include "mrc.hpp"
#include "prng.hpp"

namespace miracle {

enum class Activation : std::uint8_t { tanh = 0, relu = 1 };

struct HashConfig {
    std::uint32_t bucket_count = 1;
    std::uint64_t hash_seed = 0;

    friend bool operator==(const HashConfig&, const HashConfig&) = default;
};

/// Dense MLP architecture. Each layer's parameters are its weight matrix
/// (out x in, row-major) followed by its bias vector. A hashed layer stores
/// only bucket_count trainable values shared across those positions.
struct ModelSpec {
    std::vector<std::uint32_t> layer_sizes;
    Activation activation = Activation::tanh;
    Task task = Task::classification;
    std::vector<std::optional<HashConfig>> hash;  // one entry per layer (may be empty = none)

    std::size_t n_layers() const noexcept { return layer_sizes.size() - 1; }

    std::size_t layer_param_count(std::size_t l) const {
        return std::size_t{layer_sizes[l + 1]} * layer_sizes[l] + layer_sizes[l + 1];
    }

    const std::optional<HashConfig>& layer_hash(std::size_t l) const {
        static const std::optional<HashConfig> none;
        return l < hash.size() ? hash[l] : none;
    }

    std::size_t layer_weight_count(std::size_t l) const {
        const auto& h = layer_hash(l);
        return h ? h->bucket_count : layer_param_count(l);
    }

    std::size_t n_weights() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < n_layers(); ++l) n += layer_weight_count(l);
        return n;
    }

    std::size_t n_full_params() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < n_layers(); ++l) n += layer_param_count(l);
        return n;
    }

    // Layer of each compressed weight index.
    std::vector<std::uint32_t> weight_layers() const {
        std::vector<std::uint32_t> out;
        out.reserve(n_weights());
        for (std::size_t l = 0; l < n_layers(); ++l) out.insert(out.end(), layer_weight_count(l), static_cast<std::uint32_t>(l));
        return out;
    }

    void validate() const {
        if (layer_sizes.size() < 2) throw config_error("layers", "need at least input and output sizes");
        for (auto s : layer_sizes)
            if (s == 0) throw config_error("layers", "layer sizes must be positive");
        if (hash.size() > n_layers()) throw config_error("hash", "more hash entries than layers");
        for (std::size_t l = 0; l < hash.size(); ++l) {
            if (!hash[l]) continue;
            if (hash[l]->bucket_count == 0 || hash[l]->bucket_count > layer_param_count(l)) {
                throw config_error("hash", "bucket_count must be in [1, layer parameter count] for layer " +
                                               std::to_string(l));
            }
        }
    }

    // Missing hash entries and explicit nullopt entries compare equal.
    friend bool operator==(const ModelSpec& a, const ModelSpec& b) {
        if (a.layer_sizes != b.layer_sizes || a.activation != b.activation || a.task != b.task) return false;
        for (std::size_t l = 0; l < a.n_layers(); ++l)
            if (a.layer_hash(l) != b.layer_hash(l)) return false;
        return true;
    }
};

/// Bucket read by flat position j of a hashed layer. A bucket count equal to
/// the parameter count is the identity mapping (no sharing).
inline std::uint32_t hash_bucket(const HashConfig& h, std::size_t param_count, std::size_t j) noexcept {
    if (h.bucket_count == param_count) return static_cast<std::uint32_t>(j);
    return static_cast<std::uint32_t>(mix64(h.hash_seed ^ static_cast<std::uint64_t>(j)) % h.bucket_count);
}

struct LikelihoodResult {
    double log_likelihood = 0.0;
    std::vector<double> grad;  // d/dw over compressed weights (empty if not requested)
};

/// Evaluates log p(D | w) and its gradient for a ModelSpec, working on the
/// compressed weight vector (buckets for hashed layers).
class Mlp {
public:
    explicit Mlp(ModelSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        std::size_t offset = 0;
        for (std::size_t l = 0; l < spec_.n_layers(); ++l) {
            offsets_.push_back(offset);
            offset += spec_.layer_weight_count(l);
            const auto& h = spec_.layer_hash(l);
            std::vector<std::uint32_t> map;
            if (h) {
                const std::size_t count = spec_.layer_param_count(l);
                map.resize(count);
                for (std::size_t j = 0; j < count; ++j) map[j] = hash_bucket(*h, count, j);
            }
            bucket_maps_.push_back(std::move(map));
        }
        n_weights_ = offset;
    }

    const ModelSpec& spec() const noexcept { return spec_; }
    std::size_t n_weights() const noexcept { return n_weights_; }
    std::size_t layer_offset(std::size_t l) const noexcept { return offsets_[l]; }

    /// Full per-layer parameter tensors from the compressed weights.
    std::vector<std::vector<double>> expand(std::span<const double> w) const {
        require_same_dim(w.size(), n_weights_, "expand_hashed_weights");
        std::vector<std::vector<double>> layers(spec_.n_layers());
        for (std::size_t l = 0; l < spec_.n_layers(); ++l) {
            const std::size_t count = spec_.layer_param_count(l);
            layers[l].resize(count);
            const double* src = w.data() + offsets_[l];
            if (bucket_maps_[l].empty()) {
                std::copy(src, src + count, layers[l].begin());
            } else {
                for (std::size_t j = 0; j < count; ++j) layers[l][j] = src[bucket_maps_[l][j]];
            }
        }
        return layers;
    }

    /// Summed log-likelihood over `rows` (all rows when empty).
    LikelihoodResult log_likelihood(std::span<const double> w, const Dataset& data,
                                    std::span<const std::size_t> rows = {}, bool with_grad = false) const {
        require_same_dim(w.size(), n_weights_, "log_likelihood");
        check_data(data);
        const auto layers = expand(w);
        std::vector<std::vector<double>> grads;
        if (with_grad) {
            grads.resize(layers.size());
            for (std::size_t l = 0; l < layers.size(); ++l) grads[l].assign(layers[l].size(), 0.0);
        }
        Scratch s(spec_);
        double total = 0.0;
        const std::size_t n_rows = rows.empty() ? data.n : rows.size();
        for (std::size_t r = 0; r < n_rows; ++r) {
            const std::size_t i = rows.empty() ? r : rows[r];
            total += example(layers, data, i, s, with_grad ? &grads : nullptr);
        }
        LikelihoodResult out;
        out.log_likelihood = total;
        if (with_grad) out.grad = gather(grads);
        return out;
    }

    /// Output activations (logits or regression means) for one input.
    std::vector<double> predict(const std::vector<std::vector<double>>& layers, std::span<const double> x) const {
        Scratch s(spec_);
        forward(layers, x, s);
        return s.act.back();
    }

private:
    struct Scratch {
        std::vector<std::vector<double>> act;    // act[0] = input, act[L] = output
        std::vector<std::vector<double>> delta;  // d log p / d pre-activation
        explicit Scratch(const ModelSpec& spec) {
            for (auto s : spec.layer_sizes) {
                act.emplace_back(s, 0.0);
                delta.emplace_back(s, 0.0);
            }
        }
    };

    void check_data(const Dataset& data) const {
        if (data.d_in != spec_.layer_sizes.front()) throw dimension_error("model input width does not match dataset");
        if (data.task != spec_.task) throw dimension_error("model task does not match dataset");
        if (data.d_out != spec_.layer_sizes.back()) throw dimension_error("model output width does not match dataset");
    }

    void forward(const std::vector<std::vector<double>>& layers, std::span<const double> x, Scratch& s) const {
        std::copy(x.begin(), x.end(), s.act[0].begin());
        const std::size_t L = spec_.n_layers();
        for (std::size_t l = 0; l < L; ++l) {
            const std::size_t in = spec_.layer_sizes[l], out = spec_.layer_sizes[l + 1];
            const double* W = layers[l].data();
            const double* b = W + out * in;
            const auto& a = s.act[l];
            auto& z = s.act[l + 1];
            for (std::size_t o = 0; o < out; ++o) {
                double acc = b[o];
                const double* row = W + o * in;
                for (std::size_t i = 0; i < in; ++i) acc += row[i] * a[i];
                if (l + 1 < L) acc = spec_.activation == Activation::tanh ? std::tanh(acc) : (acc > 0.0 ? acc : 0.0);
                z[o] = acc;
            }
        }
    }

    double example(const std::vector<std::vector<double>>& layers, const Dataset& data, std::size_t i, Scratch& s,
                   std::vector<std::vector<double>>* grads) const {
        forward(layers, data.input(i), s);
        const std::size_t L = spec_.n_layers();
        const auto& out = s.act[L];
        auto& top = s.delta[L];
        double ll = 0.0;
        if (spec_.task == Task::classification) {
            const double lse = log_sum_exp(out);
            const std::uint32_t c = data.labels[i];
            ll = out[c] - lse;
            for (std::size_t o = 0; o < out.size(); ++o) top[o] = (o == c ? 1.0 : 0.0) - std::exp(out[o] - lse);
        } else {
            const auto y = data.target(i);
            for (std::size_t o = 0; o < out.size(); ++o) {
                const double r = y[o] - out[o];
                ll += -0.5 * r * r - half_log_two_pi;
                top[o] = r;
            }
        }
        if (!grads) return ll;
        for (std::size_t l = L; l-- > 0;) {
            const std::size_t in = spec_.layer_sizes[l], outw = spec_.layer_sizes[l + 1];
            const double* W = layers[l].data();
            double* gW = (*grads)[l].data();
            double* gb = gW + outw * in;
            const auto& a = s.act[l];
            const auto& dz = s.delta[l + 1];
            for (std::size_t o = 0; o < outw; ++o) {
                gb[o] += dz[o];
                double* grow = gW + o * in;
                for (std::size_t k = 0; k < in; ++k) grow[k] += dz[o] * a[k];
            }
            if (l == 0) break;
            auto& da = s.delta[l];
            for (std::size_t k = 0; k < in; ++k) {
                double acc = 0.0;
                for (std::size_t o = 0; o < outw; ++o) acc += W[o * in + k] * dz[o];
                const double ak = a[k];
                da[k] = acc * (spec_.activation == Activation::tanh ? 1.0 - ak * ak : (ak > 0.0 ? 1.0 : 0.0));
            }
        }
        return ll;
    }

    std::vector<double> gather(const std::vector<std::vector<double>>& grads) const {
        std::vector<double> g(n_weights_, 0.0);
        for (std::size_t l = 0; l < grads.size(); ++l) {
            double* dst = g.data() + offsets_[l];
            if (bucket_maps_[l].empty()) {
                std::copy(grads[l].begin(), grads[l].end(), dst);
            } else {
                for (std::size_t j = 0; j < grads[l].size(); ++j) dst[bucket_maps_[l][j]] += grads[l][j];
            }
        }
        return g;
    }

    ModelSpec spec_;
    std::vector<std::size_t> offsets_;
    std::vector<std::vector<std::uint32_t>> bucket_maps_;
    std::size_t n_weights_ = 0;
};

inline std::vector<std::vector<double>> expand_hashed_weights(const ModelSpec& spec, std::span<const double> buckets) {
    return Mlp(spec).expand(buckets);
}

inline double log_likelihood(const ModelSpec& spec, std::span<const double> w, const Dataset& data) {
    return Mlp(spec).log_likelihood(w, data).log_likelihood;
}

/// Inputs of the block-constrained objective
///   L_O = (n / |batch|) * sum_batch log p(y | x, w) - sum_{b open} beta_b KL_b
/// with w_i = mean_i + std_i * noise for weights of open blocks and the
/// frozen value otherwise. The encoding distribution has mean 0 and one
/// log-std per layer.
struct ElboProblem {
    const Mlp* model = nullptr;
    std::span<const double> mean;           // n_weights
    std::span<const double> log_std;        // n_weights
    std::span<const double> frozen_values;  // n_weights, read where the block is closed
    std::span<const double> p_log_std;      // per layer
    std::span<const std::uint32_t> block_of;  // n_weights
    std::span<const std::uint8_t> open;       // per block
    std::span<const double> betas;            // per block
    const Dataset* data = nullptr;
    std::span<const std::size_t> batch;  // rows; empty = whole dataset
};

struct ElboResult {
    double objective = 0.0;
    double scaled_log_likelihood = 0.0;
    double kl_penalty = 0.0;                // sum_b beta_b KL_b over open blocks
    std::vector<double> block_kl;           // KL_b for open blocks, 0 for closed ones
    std::vector<std::size_t> active;        // weight indices in open blocks, ascending
    std::vector<double> grad_mean;          // per active weight
    std::vector<double> grad_log_std;       // per active weight
    std::vector<double> grad_p_log_std;     // per layer
};

inline std::vector<std::size_t> active_weights(std::span<const std::uint32_t> block_of, std::span<const std::uint8_t> open) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < block_of.size(); ++i)
        if (open[block_of[i]]) active.push_back(i);
    return active;
}

/// Single-sample reparameterized estimate of L_O and its gradients.
/// `noise` holds one standard normal per active weight (ascending index).
inline ElboResult elbo_and_gradients(const ElboProblem& pb, std::span<const double> noise) {
    const Mlp& model = *pb.model;
    const std::size_t n = model.n_weights();
    require_same_dim(pb.mean.size(), n, "elbo mean");
    require_same_dim(pb.log_std.size(), n, "elbo log_std");
    require_same_dim(pb.frozen_values.size(), n, "elbo frozen values");
    require_same_dim(pb.block_of.size(), n, "elbo block assignment");
    require_same_dim(pb.p_log_std.size(), model.spec().n_layers(), "elbo p_log_std");
    require_same_dim(pb.open.size(), pb.betas.size(), "elbo betas");

    ElboResult res;
    res.active = active_weights(pb.block_of, pb.open);
    require_same_dim(noise.size(), res.active.size(), "elbo noise");

    std::vector<double> w(pb.frozen_values.begin(), pb.frozen_values.end());
    for (std::size_t a = 0; a < res.active.size(); ++a) {
        const std::size_t i = res.active[a];
        w[i] = pb.mean[i] + std::exp(clamp_log_std(pb.log_std[i])) * noise[a];
    }

    const Dataset& data = *pb.data;
    const std::size_t rows = pb.batch.empty() ? data.n : pb.batch.size();
    const double scale = rows == 0 ? 0.0 : static_cast<double>(data.n) / static_cast<double>(rows);
    const bool need_grad = !res.active.empty();
    const LikelihoodResult lik = model.log_likelihood(w, data, pb.batch, need_grad);
    res.scaled_log_likelihood = scale * lik.log_likelihood;

    const auto layer_of = model.spec().weight_layers();
    res.block_kl.assign(pb.open.size(), 0.0);
    res.grad_mean.resize(res.active.size());
    res.grad_log_std.resize(res.active.size());
    res.grad_p_log_std.assign(model.spec().n_layers(), 0.0);
    for (std::size_t a = 0; a < res.active.size(); ++a) {
        const std::size_t i = res.active[a];
        const std::uint32_t b = pb.block_of[i];
        const double beta = pb.betas[b];
        const double lq = clamp_log_std(pb.log_std[i]);
        const double lp = clamp_log_std(pb.p_log_std[layer_of[i]]);
        const double mu = pb.mean[i];
        const double sq = std::exp(lq);
        const double inv_vp = std::exp(-2.0 * lp);
        const double kl = kl_coordinate(mu, lq, 0.0, lp);
        res.block_kl[b] += kl;
        const double dll = scale * lik.grad[i];
        res.grad_mean[a] = dll - beta * mu * inv_vp;
        res.grad_log_std[a] = dll * sq * noise[a] - beta * (sq * sq * inv_vp - 1.0);
        res.grad_p_log_std[layer_of[i]] -= beta * (1.0 - (sq * sq + mu * mu) * inv_vp);
    }
    for (std::size_t b = 0; b < pb.open.size(); ++b)
        if (pb.open[b]) res.kl_penalty += pb.betas[b] * res.block_kl[b];
    res.objective = res.scaled_log_likelihood - res.kl_penalty;
    return res;
}

}  // namespace miracle
