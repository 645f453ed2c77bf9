#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "miracle.hpp"

namespace {

miracle::Overrides overrides_from(const std::optional<std::string>& data, const std::optional<std::uint64_t>& seed,
                                  const std::optional<double>& c_nats) {
    miracle::Overrides o;
    o.data = data;
    o.seed = seed;
    o.coding_goal_nats = c_nats;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"miracle: minimal random code learning for small neural networks"};
    app.require_subcommand(1);

    std::string config, out, input;
    std::optional<std::string> data, eval_config;
    std::optional<std::uint64_t> seed;
    std::optional<double> c_nats;
    std::vector<double> c_list;
    std::uint64_t diag_trials = 1'000'000;

    auto* compress = app.add_subcommand("compress", "train with MIRACLE and write a compressed model");
    compress->add_option("--config", config, "experiment config file")->required();
    compress->add_option("--data", data, "dataset: two_cluster, a .csv file or a fixture");
    compress->add_option("--out", out, "compressed model path; the run log goes to <out>.log")->required();
    compress->add_option("--seed-override", seed, "sets root_seed = S and trainer_seed = S + 1");
    compress->add_option("--c-nats", c_nats, "coding goal C in nats");

    auto* decompress = app.add_subcommand("decompress", "decode a compressed model into flat weights");
    decompress->add_option("input", input, "compressed model")->required();
    decompress->add_option("--out", out, "weights path; the manifest goes to <out>.manifest")->required();

    auto* eval = app.add_subcommand("eval", "evaluate decompressed weights");
    eval->add_option("weights", input, "weights file written by decompress")->required();
    eval->add_option("--data", data, "dataset to evaluate on (all examples)");
    eval->add_option("--config", eval_config, "use the config's dataset and test split");
    eval->add_option("--seed-override", seed, "as for compress");

    auto* sweep = app.add_subcommand("sweep", "compress at several coding goals and report a CSV");
    sweep->add_option("--config", config, "experiment config file")->required();
    sweep->add_option("--data", data, "dataset override");
    sweep->add_option("--seed-override", seed, "as for compress");
    sweep->add_option("--c-nats", c_list, "coding goals in nats, comma separated")->delimiter(',');
    sweep->add_option("--out", out, "CSV path (default: standard output)");

    auto* diagnostics = app.add_subcommand("diagnostics", "statistical checks of the coders");
    diagnostics->add_option("--diag-trials", diag_trials, "GRS trials per pair in the unbiasedness check");
    diagnostics->add_option("--out", out, "also write the report to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? miracle::exit_ok : miracle::exit_config;
    }

    try {
        if (*compress) {
            miracle::cmd_compress(config, overrides_from(data, seed, c_nats), out, std::cout);
        } else if (*decompress) {
            miracle::cmd_decompress(input, out, std::cout);
        } else if (*eval) {
            miracle::cmd_eval(input, eval_config, overrides_from(data, seed, std::nullopt), std::cout);
        } else if (*sweep) {
            const auto c = miracle::apply_overrides(miracle::load_config(config), overrides_from(data, seed, {}));
            const auto report = miracle::run_sweep(c, c_list, &std::cerr);
            const std::string csv = miracle::sweep_csv(report);
            if (out.empty()) {
                std::cout << csv;
                std::cerr << "baseline_test_error=" << report.baseline_test_error
                          << " baseline_train_log_likelihood=" << report.baseline_train_log_likelihood << "\n";
            } else {
                std::ofstream f(out);
                if (!f) throw miracle::error("cannot write '" + out + "'");
                f << csv;
                std::cout << "baseline_test_error=" << report.baseline_test_error
                          << " baseline_train_log_likelihood=" << report.baseline_train_log_likelihood << "\n";
            }
        } else if (*diagnostics) {
            miracle::DiagnosticsSettings s;
            if (diag_trials == 0) throw miracle::config_error("diag-trials", "must be >= 1");
            s.grs_trials = diag_trials;
            std::ostringstream report;
            const int rc = miracle::cmd_diagnostics(s, report);
            std::cout << report.str();
            if (!out.empty()) {
                std::ofstream f(out);
                f << report.str();
            }
            return rc;
        }
    } catch (const std::exception& e) {
        std::cerr << "miracle: " << e.what() << "\n";
        return miracle::exit_code_for(e);
    }
    return miracle::exit_ok;
}
