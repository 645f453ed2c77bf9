#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "gaussian.hpp"
#include "grs.hpp"
#include "mrc.hpp"
#include "prefix_code.hpp"
#include "trainer.hpp"

// Command implementations behind the miracle tool. Each command throws on
// failure; exit_code_for maps the exception to the documented exit code.

namespace miracle {

inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_config = 2;
inline constexpr int exit_format = 3;
inline constexpr int exit_diagnostics = 4;

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const config_error*>(&e)) return exit_config;
    if (dynamic_cast<const format_error*>(&e)) return exit_format;
    return exit_failure;
}

/// Command-line overrides on top of a config file.
struct Overrides {
    std::optional<std::string> data;
    std::optional<std::uint64_t> seed;  // root_seed = s, trainer_seed = s + 1
    std::optional<double> coding_goal_nats;
};

inline ExperimentConfig apply_overrides(ExperimentConfig c, const Overrides& o) {
    if (o.data) {
        c.dataset = *o.data;
        c.base_dir.clear();
    }
    if (o.seed) {
        c.train.root_seed = *o.seed;
        c.train.trainer_seed = *o.seed + 1;
    }
    if (o.coding_goal_nats) {
        c.train.coding_goal_nats = *o.coding_goal_nats;
        try {
            c.train.validate();
        } catch (const config_error& e) {
            throw config_error("c-nats", e.what());
        }
    }
    if (c.spec.n_weights() < block_count_for(c.train.coding_goal_nats, c.train.local_goal_nats)) {
        throw config_error("coding_goal", "more blocks than weights");
    }
    return c;
}

inline TrainTestSplit load_split(const ExperimentConfig& c) {
    return split_dataset(load_experiment_data(c), c.test_fraction, c.split_seed);
}

// ---------------------------------------------------------------- compress

struct CompressOutcome {
    TrainResult train;
    std::vector<std::uint8_t> file;
    SizeReport size;
    Evaluation test;
    Evaluation train_fit;
    std::size_t blocks_over_goal = 0;  // pre-encode KL > C_loc
    double wall_time_s = 0.0;
};

inline CompressOutcome compress_experiment(const ExperimentConfig& c, const TrainTestSplit& split) {
    const auto t0 = std::chrono::steady_clock::now();
    CompressOutcome out;
    out.train = run_miracle(c.train, c.spec, split.train);
    out.file = write_model(out.train.model);
    out.size = size_report(out.train.model);
    out.test = evaluate(c.spec, out.train.weights, split.test);
    out.train_fit = evaluate(c.spec, out.train.weights, split.train);
    for (double kl : out.train.pre_encode_kl)
        if (kl > c.train.local_goal_nats) ++out.blocks_over_goal;
    out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

/// Run log: the configuration, the trainer's log, and the final accounting.
/// Contains no timing so repeated runs produce identical logs.
inline std::string compress_log(const ExperimentConfig& c, const CompressOutcome& o) {
    std::ostringstream s;
    s.precision(17);
    s << "config coding_goal_nats=" << c.train.coding_goal_nats << " local_goal_nats=" << c.train.local_goal_nats
      << " I0=" << c.train.initial_iterations << " I=" << c.train.intermediate_iterations
      << " eps_beta0=" << c.train.eps_beta0 << " eps_beta=" << c.train.eps_beta
      << " learning_rate=" << c.train.learning_rate << " batch_size=" << c.train.batch_size
      << " root_seed=" << c.train.root_seed << " trainer_seed=" << c.train.trainer_seed << "\n";
    s << o.train.log;
    s.precision(6);
    s << "result blocks=" << o.train.model.block_count << " k_bits=" << unsigned(o.train.model.k_bits)
      << " header_bytes=" << o.size.header << " payload_bytes=" << o.size.payload << " file_bytes=" << o.size.total
      << " blocks_over_goal=" << o.blocks_over_goal << " test_error=" << o.test.error_rate
      << " train_mean_log_likelihood=" << o.train_fit.mean_log_likelihood << "\n";
    return s.str();
}

inline void print_compress_summary(std::ostream& os, const CompressOutcome& o) {
    char line[512];
    std::snprintf(line, sizeof line,
                  "blocks=%u k_bits=%u header_bytes=%zu payload_bytes=%zu file_bytes=%zu compression_ratio=%.2f\n"
                  "blocks_over_local_goal=%zu max_pre_encode_kl_nats=%.4f\n"
                  "test_error_pct=%.3f test_mean_log_likelihood=%.6f train_mean_log_likelihood=%.6f\n"
                  "wall_time_s=%.2f\n",
                  o.train.model.block_count, unsigned(o.train.model.k_bits), o.size.header, o.size.payload,
                  o.size.total, o.size.compression_ratio, o.blocks_over_goal,
                  o.train.pre_encode_kl.empty()
                      ? 0.0
                      : *std::max_element(o.train.pre_encode_kl.begin(), o.train.pre_encode_kl.end()),
                  100.0 * o.test.error_rate, o.test.mean_log_likelihood, o.train_fit.mean_log_likelihood,
                  o.wall_time_s);
    os << line;
}

/// Writes <out> and <out>.log.
inline CompressOutcome cmd_compress(const std::string& config_path, const Overrides& overrides,
                                    const std::string& out_path, std::ostream& os) {
    const ExperimentConfig c = apply_overrides(load_config(config_path), overrides);
    const TrainTestSplit split = load_split(c);
    CompressOutcome o = compress_experiment(c, split);
    write_file_bytes(out_path, o.file);
    const std::string log = compress_log(c, o);
    write_file_bytes(out_path + ".log", std::span(reinterpret_cast<const std::uint8_t*>(log.data()), log.size()));
    print_compress_summary(os, o);
    return o;
}

// -------------------------------------------------------------- decompress

// Flat weights file: every layer's W (out x in, row-major) then bias, all
// layers in order, as little-endian f64. <path>.manifest describes it.
inline std::vector<double> flatten_layers(const std::vector<std::vector<double>>& layers) {
    std::vector<double> flat;
    for (const auto& l : layers) flat.insert(flat.end(), l.begin(), l.end());
    return flat;
}

inline nlohmann::json weights_manifest(const ModelSpec& spec) {
    using nlohmann::json;
    json tensors = json::array();
    std::size_t offset = 0;
    for (std::size_t l = 0; l < spec.n_layers(); ++l) {
        const std::size_t in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
        tensors.push_back({{"name", "layer" + std::to_string(l) + ".weight"}, {"shape", {out, in}}, {"offset", offset}});
        offset += in * out;
        tensors.push_back({{"name", "layer" + std::to_string(l) + ".bias"}, {"shape", {out}}, {"offset", offset}});
        offset += out;
    }
    json hashed = json::array();
    for (std::size_t l = 0; l < spec.n_layers(); ++l) {
        if (const auto& h = spec.layer_hash(l)) {
            hashed.push_back({{"layer", l}, {"bucket_count", h->bucket_count}, {"hash_seed", h->hash_seed}});
        }
    }
    return {{"format", "miracle-weights"},
            {"version", 1},
            {"dtype", "f64-le"},
            {"layer_sizes", spec.layer_sizes},
            {"activation", spec.activation == Activation::tanh ? "tanh" : "relu"},
            {"task", spec.task == Task::classification ? "classification" : "regression"},
            {"count", offset},
            {"hashed_layers", hashed},
            {"tensors", tensors}};
}

inline void write_weights(const std::string& path, const ModelSpec& spec, const std::vector<double>& flat) {
    ByteWriter w;
    for (double x : flat) w.f64(x);
    write_file_bytes(path, w.bytes());
    std::ofstream m(path + ".manifest");
    if (!m) throw error("cannot write '" + path + ".manifest'");
    m << weights_manifest(spec).dump(2) << "\n";
}

struct LoadedWeights {
    ModelSpec spec;  // unhashed: the flat vector holds every parameter
    std::vector<double> flat;
};

inline LoadedWeights read_weights(const std::string& path) {
    std::ifstream m(path + ".manifest");
    if (!m) throw error("cannot open '" + path + ".manifest'");
    LoadedWeights out;
    try {
        const auto j = nlohmann::json::parse(m);
        if (j.at("format") != "miracle-weights" || j.at("version") != 1) {
            throw format_error(format_errc::unknown_version, "weights manifest format");
        }
        out.spec.layer_sizes = j.at("layer_sizes").get<std::vector<std::uint32_t>>();
        const std::string act = j.at("activation"), task = j.at("task");
        out.spec.activation = act == "relu" ? Activation::relu : Activation::tanh;
        out.spec.task = task == "regression" ? Task::regression : Task::classification;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(format_errc::corrupt, std::string("weights manifest: ") + e.what());
    }
    out.spec.validate();
    const auto bytes = read_file_bytes(path);
    if (bytes.size() != 8 * out.spec.n_full_params()) {
        throw format_error(format_errc::truncated, "weights file size does not match the manifest");
    }
    ByteReader r(bytes);
    out.flat.resize(out.spec.n_full_params());
    for (double& x : out.flat) x = r.f64();
    return out;
}

inline DecodedModel cmd_decompress(const std::string& in_path, const std::string& out_path, std::ostream& os) {
    const CompressedModel m = read_model(read_file_bytes(in_path));
    DecodedModel d = decompress(m);
    write_weights(out_path, m.spec, flatten_layers(d.layers));
    os << "blocks=" << m.block_count << " k_bits=" << unsigned(m.k_bits) << " n_weights=" << m.n_weights
       << " parameters=" << m.spec.n_full_params() << "\n";
    return d;
}

// -------------------------------------------------------------------- eval

/// Evaluates a decompressed weights file. With a config, the config's test
/// split is used; otherwise every example of the dataset.
inline Evaluation cmd_eval(const std::string& weights_path, const std::optional<std::string>& config_path,
                           const Overrides& overrides, std::ostream& os) {
    const LoadedWeights w = read_weights(weights_path);
    Dataset data;
    if (config_path) {
        const ExperimentConfig c = apply_overrides(load_config(*config_path), overrides);
        data = load_split(c).test;
    } else {
        if (!overrides.data) throw config_error("data", "eval needs --data or --config");
        ExperimentConfig c;
        c.spec = w.spec;
        c.dataset = *overrides.data;
        data = load_experiment_data(c);
    }
    const Evaluation e = evaluate(w.spec, w.flat, data);
    char line[256];
    if (w.spec.task == Task::classification) {
        std::snprintf(line, sizeof line, "examples=%zu\nerror_pct=%.3f\nmean_log_likelihood=%.6f\n", data.n,
                      100.0 * e.error_rate, e.mean_log_likelihood);
    } else {
        std::snprintf(line, sizeof line, "examples=%zu\nmean_squared_error=%.6f\nmean_log_likelihood=%.6f\n", data.n,
                      e.mean_squared_error, e.mean_log_likelihood);
    }
    os << line;
    return e;
}

// ------------------------------------------------------------------- sweep

struct SweepRow {
    double coding_goal_nats = 0.0;
    std::size_t file_bytes = 0;
    double compression_ratio = 0.0;
    double test_error = 0.0;
    double mean_train_log_likelihood = 0.0;
    double wall_time_s = 0.0;
    // not part of the CSV
    std::uint32_t blocks = 0;
    std::size_t payload_bytes = 0;
    std::size_t header_bytes = 0;
    std::size_t blocks_over_goal = 0;
    std::size_t blocks_over_125 = 0;  // pre-encode KL > 1.25 C_loc
};

struct SweepReport {
    std::vector<SweepRow> rows;  // ascending coding goal
    double baseline_test_error = 0.0;
    double baseline_train_log_likelihood = 0.0;
};

inline constexpr const char* sweep_csv_header =
    "coding_goal_nats,file_bytes,compression_ratio,test_error,mean_train_log_likelihood,wall_time_s";

inline std::string sweep_csv(const SweepReport& r) {
    std::string s = std::string(sweep_csv_header) + "\n";
    char line[256];
    for (const auto& row : r.rows) {
        std::snprintf(line, sizeof line, "%.6f,%zu,%.4f,%.6f,%.6f,%.3f\n", row.coding_goal_nats, row.file_bytes,
                      row.compression_ratio, row.test_error, row.mean_train_log_likelihood, row.wall_time_s);
        s += line;
    }
    return s;
}

/// Sweep points run one after another; each is a full compress at its own C.
/// With no explicit list, C is the config's coding goal times each sweep
/// multiplier. The baseline is the deterministic maximum-likelihood model.
inline SweepReport run_sweep(const ExperimentConfig& c, std::vector<double> coding_goals,
                             std::ostream* progress = nullptr) {
    if (coding_goals.empty()) {
        for (double m : c.sweep_multipliers) coding_goals.push_back(m * c.train.coding_goal_nats);
    }
    std::sort(coding_goals.begin(), coding_goals.end());
    const TrainTestSplit split = load_split(c);
    SweepReport report;
    for (double goal : coding_goals) {
        Overrides o;
        o.coding_goal_nats = goal;
        const ExperimentConfig point = apply_overrides(c, o);
        const CompressOutcome out = compress_experiment(point, split);
        SweepRow row;
        row.coding_goal_nats = goal;
        row.file_bytes = out.size.total;
        row.compression_ratio = out.size.compression_ratio;
        row.test_error = out.test.error_rate;
        row.mean_train_log_likelihood = out.train_fit.mean_log_likelihood;
        row.wall_time_s = out.wall_time_s;
        row.blocks = out.train.model.block_count;
        row.payload_bytes = out.size.payload;
        row.header_bytes = out.size.header;
        row.blocks_over_goal = out.blocks_over_goal;
        for (double kl : out.train.pre_encode_kl)
            if (kl > 1.25 * point.train.local_goal_nats) ++row.blocks_over_125;
        if (progress) {
            *progress << "sweep C=" << goal << " nats: blocks=" << row.blocks << " bytes=" << row.file_bytes
                      << " test_error=" << row.test_error << " time=" << row.wall_time_s << "s\n";
        }
        report.rows.push_back(row);
    }
    const auto base = train_baseline(c.train, c.spec, split.train, c.effective_baseline_steps());
    report.baseline_test_error = evaluate(c.spec, base, split.test).error_rate;
    report.baseline_train_log_likelihood = evaluate(c.spec, base, split.train).mean_log_likelihood;
    return report;
}

// ------------------------------------------------------------- diagnostics

struct DiagnosticResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct DiagnosticsReport {
    std::vector<DiagnosticResult> results;

    bool all_passed() const {
        return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
    }
};

struct DiagnosticsSettings {
    std::uint64_t grs_trials = 1'000'000;  // per pair, unbiasedness check
    std::uint64_t length_trials = 10'000;  // per pair, coding-length check
    std::uint64_t proxy_constructions = 1000;
    std::uint64_t seed = 0x5EED;
};

namespace diag {

inline std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Dirichlet(1) draw mixed with the uniform so every mass is >= floor.
inline DiscreteDistribution random_discrete(SampleStream& s, std::size_t m, double floor) {
    std::vector<double> w(m);
    double total = 0.0;
    for (double& x : w) total += (x = -std::log(1.0 - s.next_uniform()));
    const double free = 1.0 - floor * static_cast<double>(m);
    for (double& x : w) x = floor + free * x / total;
    return DiscreteDistribution::from_weights(std::move(w));
}

struct BiasCheck {
    double epsilon = 0.0;
    double threshold = 0.0;  // 2 ||f||_q eps / (1 - eps)
    double rate = 0.0;
    double allowed = 0.0;  // min(2 eps, 1) + 3 binomial std
    std::uint64_t K = 0;
};

/// Deviation rate of E_q~[w] from E_q[w] over independent 1-D proxies with
/// K = exp(KL + t), against the bound's 2 eps rate.
inline BiasCheck proxy_bias_check(double q_mean, double q_std, double t, std::uint64_t constructions,
                                  std::uint64_t seed) {
    const DiagonalGaussian q({q_mean}, {std::log(q_std)});
    const DiagonalGaussian p({0.0}, {0.0});
    const double kl = kl_divergence(q, p);
    BiasCheck c;
    c.K = required_samples(kl, t);
    const double tail = estimate_log_ratio_tail(q, p, kl + t / 2.0, 100'000, seed);
    c.epsilon = bias_bound_epsilon(t, tail);
    const double f_norm = std::sqrt(q_mean * q_mean + q_std * q_std);
    c.threshold = c.epsilon < 1.0 ? 2.0 * f_norm * c.epsilon / (1.0 - c.epsilon) : INFINITY;
    std::uint64_t hits = 0;
    std::vector<double> logw(c.K), w(c.K);
    for (std::uint64_t r = 0; r < constructions; ++r) {
        const SampleStream stream(seed ^ 0xB1A5, static_cast<std::uint32_t>(r));
        for (std::uint64_t k = 0; k < c.K; ++k) {
            w[k] = stream_sample(p, stream, k)[0];
            logw[k] = log_density(q, std::span(&w[k], 1)) - log_density(p, std::span(&w[k], 1));
        }
        const double z = log_sum_exp(logw);
        double e = 0.0;
        for (std::uint64_t k = 0; k < c.K; ++k) e += std::exp(logw[k] - z) * w[k];
        if (std::abs(e - q_mean) >= c.threshold) ++hits;
    }
    const double n = static_cast<double>(constructions);
    c.rate = static_cast<double>(hits) / n;
    const double p_bound = std::min(2.0 * c.epsilon, 1.0);
    c.allowed = p_bound + 3.0 * std::sqrt(p_bound * (1.0 - p_bound) / n);
    return c;
}

inline double total_variation(std::span<const double> a, std::span<const double> b) {
    double tv = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
    return 0.5 * tv;
}

inline std::vector<double> grs_empirical(const DiscreteDistribution& q, const DiscreteDistribution& p,
                                         std::uint64_t trials, std::uint64_t seed) {
    std::vector<double> freq(q.size(), 0.0);
    for (std::uint64_t t = 0; t < trials; ++t) {
        const auto id = static_cast<std::uint32_t>(2 * t);
        ++freq[grs_sample(q, p, SampleStream(seed, id), SampleStream(seed, id + 1)).element];
    }
    for (double& f : freq) f /= static_cast<double>(trials);
    return freq;
}

}  // namespace diag

inline DiagnosticsReport run_diagnostics(const DiagnosticsSettings& s, std::ostream* progress = nullptr) {
    using diag::fmt;
    DiagnosticsReport rep;
    auto add = [&](std::string name, bool ok, std::string detail) {
        if (progress) *progress << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
        rep.results.push_back({std::move(name), ok, std::move(detail)});
    };

    // Proxy bias, q = N(0.5, 0.25^2) against p = N(0, 1), and the q = p case.
    {
        const auto c = diag::proxy_bias_check(0.5, 0.25, 4.0, s.proxy_constructions, s.seed);
        add("proxy_bias", c.rate <= c.allowed,
            fmt("K=%llu eps=%.4f threshold=%.4f rate=%.4f allowed=%.4f", (unsigned long long)c.K, c.epsilon,
                c.threshold, c.rate, c.allowed));
        const auto id = diag::proxy_bias_check(0.0, 1.0, 4.0, s.proxy_constructions, s.seed + 1);
        add("proxy_bias_identity", id.rate <= id.allowed,
            fmt("K=%llu eps=%.4f rate=%.4f allowed=%.4f", (unsigned long long)id.K, id.epsilon, id.rate, id.allowed));
    }

    // GRS unbiasedness and the halting bound on 20 random pairs, m <= 8.
    {
        SampleStream gen(s.seed, 0x6125);
        double worst_tv = 0.0, worst_defect = -INFINITY;
        bool halting_ok = true;
        for (int k = 0; k < 20; ++k) {
            const std::size_t m = 2 + uniform_index(gen, 7);
            const auto q = diag::random_discrete(gen, m, 0.0);
            const auto p = diag::random_discrete(gen, m, 0.01);
            const auto freq = diag::grs_empirical(q, p, s.grs_trials, s.seed + 100 + k);
            worst_tv = std::max(worst_tv, diag::total_variation(freq, q.probs()));
            GrsState state(m);
            for (int i = 0; i <= 64; ++i) {
                grs_advance(state, q, p, 0);
                for (std::size_t w = 0; w < m; ++w) {
                    const double excess = (q[w] - state.p_cum[w]) - q[w] * std::pow(1.0 - p[w], i + 1);
                    worst_defect = std::max(worst_defect, excess);
                    if (excess > 1e-12 || q[w] - state.p_cum[w] < -1e-12) halting_ok = false;
                }
            }
        }
        add("grs_unbiased", worst_tv < 0.01,
            fmt("20 pairs, %llu trials each, max TV=%.5f", (unsigned long long)s.grs_trials, worst_tv));
        add("grs_halting_bound", halting_ok, fmt("i<=64, max (defect - bound)=%.3g", worst_defect));
        const auto u = DiscreteDistribution::from_weights({1, 1, 1, 1});
        const auto freq = diag::grs_empirical(u, u, 1000, s.seed + 7);
        add("grs_identity", diag::total_variation(freq, u.probs()) < 0.1 &&
                                grs_code_length_stats(u, u, 1000, s.seed + 8).mean_bits == 1.0,
            "q = p accepts the first proposal");
    }

    // Prefix code: length bound, round trip, and prefix-freeness.
    {
        bool ok = true;
        double worst = -INFINITY;
        for (std::uint64_t n = 1; n <= 1'000'000; ++n) {
            const double l2 = std::log2(static_cast<double>(n));
            const double slack = static_cast<double>(delta_length(n)) - (l2 + 2.0 * std::log2(l2 + 1.0) + 4.0);
            worst = std::max(worst, slack);
            if (slack > 0.0) ok = false;
        }
        std::vector<std::string> codes;
        for (std::uint64_t n = 1; n <= (1u << 14); ++n) {
            codes.push_back(prefix_encode_index(n));
            if (prefix_decode_index(codes.back()) != n) ok = false;
        }
        std::sort(codes.begin(), codes.end());
        std::size_t prefix_pairs = 0;
        for (std::size_t i = 1; i < codes.size(); ++i)
            if (codes[i].starts_with(codes[i - 1])) ++prefix_pairs;
        add("prefix_code", ok && prefix_pairs == 0,
            fmt("n<=1e6 max(length - bound)=%.3f bits; prefix pairs among n<=2^14: %zu", worst, prefix_pairs));
    }

    // GRS coding length against KL: 50 random pairs with m = 16, plus
    // quantized 1-D Gaussian blocks.
    {
        SampleStream gen(s.seed, 0x1E9);
        double worst_const = -INFINITY;
        bool ok = true;
        auto check = [&](const DiscreteDistribution& q, const DiscreteDistribution& p, std::uint64_t seed) {
            const double kl_bits = nats_to_bits(kl_discrete(q, p));
            const double len = grs_code_length_stats(q, p, s.length_trials, seed).mean_bits;
            const double c = len - kl_bits - 2.0 * std::log2(kl_bits + 1.0);
            worst_const = std::max(worst_const, c);
            if (c > 6.0) ok = false;
        };
        for (int k = 0; k < 50; ++k) {
            const auto q = diag::random_discrete(gen, 16, 0.0);
            const auto p = diag::random_discrete(gen, 16, 0.001);
            check(q, p, s.seed + 1000 + k);
        }
        const auto p1 = discretize_gaussian(0.0, 1.0, -4.0, 4.0, 64);
        const double stds[] = {1.0, 0.5, 0.25, 0.1};
        for (int k = 0; k < 4; ++k) check(discretize_gaussian(0.3, stds[k], -4.0, 4.0, 64), p1, s.seed + 2000 + k);
        add("grs_coding_length", ok, fmt("max observed constant=%.3f bits (limit 6)", worst_const));
    }

    // MRC message length against the coding-length bounds.
    {
        bool ok = true;
        for (double kl = 0.0; kl <= 20.0; kl += 0.25) {
            const double bits = required_index_bits(kl);
            const auto b = coding_length_bounds(kl);
            if (bits < nats_to_bits(b.lower) - 1e-9 || bits > nats_to_bits(b.upper)) ok = false;
        }
        add("mrc_coding_length", ok, "ceil(KL / ln 2) bits within [KL, KL + 2 ln(KL+1) + 5 nats] for KL in [0, 20]");
    }
    return rep;
}

inline int cmd_diagnostics(const DiagnosticsSettings& s, std::ostream& os) {
    const DiagnosticsReport r = run_diagnostics(s, &os);
    os << (r.all_passed() ? "diagnostics passed\n" : "diagnostics FAILED\n");
    return r.all_passed() ? exit_ok : exit_diagnostics;
}

}  // namespace miracle
