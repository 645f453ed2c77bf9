#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "gaussian.hpp"
#include "model.hpp"
#include "trainer.hpp"

// Experiment configuration: a key = value text file, '#' starts a comment.
//
//   coding_goal_bits | coding_goal_nats      C
//   local_goal_bits  | local_goal_nats       C_loc
//   initial_iterations, intermediate_iterations, eps_beta0, eps_beta,
//   learning_rate, batch_size, root_seed, trainer_seed, init_log_std, log_every
//   layers           comma separated sizes, input first
//   activation       tanh | relu
//   task             classification | regression
//   hash_buckets     per layer bucket count, 0 = not hashed
//   hash_seed        layer l hashes with hash_seed + l
//   dataset          two_cluster, or a path to a .csv / fixture (relative to the config file)
//   dataset_size, dataset_seed           two_cluster generator
//   test_fraction, split_seed
//   baseline_steps   0 = initial_iterations
//   sweep_multipliers                    default coding goals relative to C

namespace miracle {

struct ExperimentConfig {
    TrainConfig train;
    ModelSpec spec;
    std::string dataset = "two_cluster";
    std::size_t dataset_size = 1000;
    std::uint64_t dataset_seed = 20190306;
    double test_fraction = 0.5;
    std::uint64_t split_seed = 7;
    std::uint64_t baseline_steps = 0;
    std::vector<double> sweep_multipliers{0.25, 0.5, 1.0, 2.0};
    std::filesystem::path base_dir;  // relative dataset paths resolve here

    std::uint64_t effective_baseline_steps() const {
        return baseline_steps ? baseline_steps : train.initial_iterations;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto a = s.find_first_not_of(ws);
    if (a == std::string_view::npos) return {};
    return s.substr(a, s.find_last_not_of(ws) - a + 1);
}

inline double parse_real(std::string_view key, std::string_view v) {
    double x = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(x)) {
        throw config_error(std::string(key), "expected a real number, got '" + std::string(v) + "'");
    }
    return x;
}

inline std::uint64_t parse_uint(std::string_view key, std::string_view v) {
    std::uint64_t x = 0;
    int base = 10;
    if (v.starts_with("0x") || v.starts_with("0X")) {
        v.remove_prefix(2);
        base = 16;
    }
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x, base);
    if (v.empty() || ec != std::errc{} || p != v.data() + v.size()) {
        throw config_error(std::string(key), "expected a non-negative integer, got '" + std::string(v) + "'");
    }
    return x;
}

template <class F>
auto parse_list(std::string_view key, std::string_view v, F parse_one) {
    std::vector<decltype(parse_one(key, v))> out;
    while (true) {
        const auto comma = v.find(',');
        out.push_back(parse_one(key, trim(v.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
    ExperimentConfig c;
    c.base_dir = base_dir;
    c.spec.layer_sizes = {2, 44, 40, 2};
    std::vector<std::uint64_t> hash_buckets;
    std::uint64_t hash_seed = 0;
    bool have_c = false, have_cloc = false;
    std::map<std::string, std::size_t, std::less<>> seen;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view s = line;
        if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = detail::trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) {
            throw config_error(std::string(s), "line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key(detail::trim(s.substr(0, eq)));
        const std::string_view v = detail::trim(s.substr(eq + 1));
        if (seen.contains(key)) throw config_error(key, "given twice (line " + std::to_string(line_no) + ")");
        seen[key] = line_no;
        if (v.empty()) throw config_error(key, "missing value");

        auto& t = c.train;
        if (key == "coding_goal_bits" || key == "coding_goal_nats") {
            if (have_c) throw config_error(key, "coding goal given twice");
            const double x = detail::parse_real(key, v);
            t.coding_goal_nats = key == "coding_goal_bits" ? bits_to_nats(x) : x;
            have_c = true;
        } else if (key == "local_goal_bits" || key == "local_goal_nats") {
            if (have_cloc) throw config_error(key, "local goal given twice");
            const double x = detail::parse_real(key, v);
            t.local_goal_nats = key == "local_goal_bits" ? bits_to_nats(x) : x;
            have_cloc = true;
        } else if (key == "initial_iterations") {
            t.initial_iterations = detail::parse_uint(key, v);
        } else if (key == "intermediate_iterations") {
            t.intermediate_iterations = detail::parse_uint(key, v);
        } else if (key == "eps_beta0") {
            t.eps_beta0 = detail::parse_real(key, v);
        } else if (key == "eps_beta") {
            t.eps_beta = detail::parse_real(key, v);
        } else if (key == "learning_rate") {
            t.learning_rate = detail::parse_real(key, v);
        } else if (key == "batch_size") {
            t.batch_size = detail::parse_uint(key, v);
        } else if (key == "root_seed") {
            t.root_seed = detail::parse_uint(key, v);
        } else if (key == "trainer_seed") {
            t.trainer_seed = detail::parse_uint(key, v);
        } else if (key == "init_log_std") {
            t.init_log_std = detail::parse_real(key, v);
        } else if (key == "log_every") {
            t.log_every = detail::parse_uint(key, v);
        } else if (key == "layers") {
            const auto sizes = detail::parse_list(key, v, detail::parse_uint);
            c.spec.layer_sizes.assign(sizes.begin(), sizes.end());
        } else if (key == "activation") {
            if (v == "tanh") c.spec.activation = Activation::tanh;
            else if (v == "relu") c.spec.activation = Activation::relu;
            else throw config_error(key, "expected tanh or relu");
        } else if (key == "task") {
            if (v == "classification") c.spec.task = Task::classification;
            else if (v == "regression") c.spec.task = Task::regression;
            else throw config_error(key, "expected classification or regression");
        } else if (key == "hash_buckets") {
            hash_buckets = detail::parse_list(key, v, detail::parse_uint);
        } else if (key == "hash_seed") {
            hash_seed = detail::parse_uint(key, v);
        } else if (key == "dataset") {
            c.dataset = std::string(v);
        } else if (key == "dataset_size") {
            c.dataset_size = detail::parse_uint(key, v);
        } else if (key == "dataset_seed") {
            c.dataset_seed = detail::parse_uint(key, v);
        } else if (key == "test_fraction") {
            c.test_fraction = detail::parse_real(key, v);
            if (!(c.test_fraction >= 0.0 && c.test_fraction < 1.0)) throw config_error(key, "must be in [0, 1)");
        } else if (key == "split_seed") {
            c.split_seed = detail::parse_uint(key, v);
        } else if (key == "baseline_steps") {
            c.baseline_steps = detail::parse_uint(key, v);
        } else if (key == "sweep_multipliers") {
            c.sweep_multipliers = detail::parse_list(key, v, detail::parse_real);
            for (double m : c.sweep_multipliers)
                if (!(m > 0.0)) throw config_error(key, "multipliers must be > 0");
        } else {
            throw config_error(key, "unknown key (line " + std::to_string(line_no) + ")");
        }
    }

    if (!hash_buckets.empty()) {
        if (hash_buckets.size() != c.spec.n_layers()) {
            throw config_error("hash_buckets", "need one entry per layer (" + std::to_string(c.spec.n_layers()) + ")");
        }
        c.spec.hash.assign(c.spec.n_layers(), std::nullopt);
        for (std::size_t l = 0; l < hash_buckets.size(); ++l) {
            if (hash_buckets[l] == 0) continue;
            if (hash_buckets[l] > 0xFFFFFFFFull) throw config_error("hash_buckets", "bucket count too large");
            c.spec.hash[l] = HashConfig{static_cast<std::uint32_t>(hash_buckets[l]), hash_seed + l};
        }
    }
    c.spec.validate();
    c.train.validate();
    if (c.spec.n_weights() < static_cast<std::size_t>(block_count_for(c.train.coding_goal_nats, c.train.local_goal_nats))) {
        throw config_error("coding_goal", "more blocks than weights");
    }
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config", "cannot open '" + path.string() + "'");
    return parse_config(in, path.parent_path());
}

inline ExperimentConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

/// The configured dataset, checked against the architecture's input and
/// output widths.
inline Dataset load_experiment_data(const ExperimentConfig& c) {
    Dataset d;
    if (c.dataset == "two_cluster") {
        d = make_two_cluster(c.dataset_size, c.dataset_seed);
    } else {
        std::filesystem::path p(c.dataset);
        if (p.is_relative() && !c.base_dir.empty() && !std::filesystem::exists(p)) p = c.base_dir / p;
        if (!std::filesystem::exists(p)) throw config_error("dataset", "no such file '" + p.string() + "'");
        d = p.extension() == ".csv" ? load_csv(p.string(), c.spec.task) : load_fixture(p.string());
    }
    if (d.task != c.spec.task) throw config_error("task", "dataset task differs from the configured task");
    if (d.d_in != c.spec.layer_sizes.front()) {
        throw config_error("layers", "input width " + std::to_string(c.spec.layer_sizes.front()) +
                                         " but dataset has " + std::to_string(d.d_in) + " features");
    }
    // A class set may be missing its highest labels.
    if (d.task == Task::classification && d.d_out < c.spec.layer_sizes.back()) d.d_out = c.spec.layer_sizes.back();
    if (d.d_out != c.spec.layer_sizes.back()) {
        throw config_error("layers", "output width " + std::to_string(c.spec.layer_sizes.back()) +
                                         " but dataset has " + std::to_string(d.d_out) + " outputs");
    }
    return d;
}

}  // namespace miracle
