#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "miracle/harness.hpp"

using namespace miracle;
namespace fs = std::filesystem;

namespace {

const char* small_config =
    "coding_goal_bits = 60\n"
    "local_goal_bits = 10\n"
    "initial_iterations = 300\n"
    "intermediate_iterations = 10\n"
    "eps_beta0 = 1e-3\n"
    "eps_beta = 5e-4\n"
    "learning_rate = 1e-2\n"
    "batch_size = 16\n"
    "log_every = 100\n"
    "layers = 2, 8, 2\n"
    "dataset_size = 200\n"
    "sweep_multipliers = 0.5, 1\n";

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

class Harness : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("miracle_harness_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
        write("small.cfg", small_config);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path path(const std::string& name) const { return dir_ / name; }

    void write(const std::string& name, const std::string& body) const { std::ofstream(path(name), std::ios::binary) << body; }

    CliRun cli(const std::string& args) const {
        const std::string cmd = std::string("\"") + MIRACLE_CLI_PATH + "\" " + args + " >\"" + path("stdout").string() +
                                "\" 2>\"" + path("stderr").string() + "\"";
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(path("stdout")), slurp(path("stderr"))};
    }

    std::string q(const std::string& name) const { return "\"" + path(name).string() + "\""; }

    fs::path dir_;
};

}  // namespace

TEST(ExitCodes, MapExceptionTypes) {
    EXPECT_EQ(exit_code_for(config_error("x", "y")), exit_config);
    EXPECT_EQ(exit_code_for(format_error(format_errc::corrupt, "y")), exit_format);
    EXPECT_EQ(exit_code_for(numeric_error("y")), exit_failure);
    EXPECT_EQ(exit_code_for(std::runtime_error("y")), exit_failure);
}

TEST(Overrides, SeedDataAndCodingGoal) {
    auto c = parse_config_string(small_config);
    Overrides o;
    o.seed = 41;
    o.data = "elsewhere.csv";
    o.coding_goal_nats = 30.0;
    const auto r = apply_overrides(c, o);
    EXPECT_EQ(r.train.root_seed, 41u);
    EXPECT_EQ(r.train.trainer_seed, 42u);
    EXPECT_EQ(r.dataset, "elsewhere.csv");
    EXPECT_EQ(r.train.coding_goal_nats, 30.0);
    Overrides bad;
    bad.coding_goal_nats = 1.0;
    try {
        apply_overrides(c, bad);
        FAIL();
    } catch (const config_error& e) {
        EXPECT_EQ(e.field(), "c-nats");
    }
    Overrides many;
    many.coding_goal_nats = 1000.0;
    EXPECT_THROW(apply_overrides(c, many), config_error);
}

TEST(Weights, ManifestDescribesLayout) {
    ModelSpec spec;
    spec.layer_sizes = {3, 4, 2};
    spec.hash = {HashConfig{5, 9}, std::nullopt};
    const auto j = weights_manifest(spec);
    EXPECT_EQ(j["format"], "miracle-weights");
    EXPECT_EQ(j["count"], 26);
    EXPECT_EQ(j["tensors"].size(), 4u);
    EXPECT_EQ(j["tensors"][1]["name"], "layer0.bias");
    EXPECT_EQ(j["tensors"][1]["offset"], 12);
    EXPECT_EQ(j["tensors"][2]["offset"], 16);
    EXPECT_EQ(j["hashed_layers"][0]["bucket_count"], 5);
}

TEST_F(Harness, WeightsFileRoundTrip) {
    ModelSpec spec;
    spec.layer_sizes = {3, 4, 2};
    spec.activation = Activation::relu;
    spec.task = Task::regression;
    std::vector<double> flat(26);
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = 0.1 * static_cast<double>(i) - 1.0;
    write_weights(path("w.bin").string(), spec, flat);
    const auto back = read_weights(path("w.bin").string());
    EXPECT_EQ(back.flat, flat);
    EXPECT_EQ(back.spec.layer_sizes, spec.layer_sizes);
    EXPECT_EQ(back.spec.activation, Activation::relu);
    EXPECT_EQ(back.spec.task, Task::regression);
    write("w.bin", "short");
    EXPECT_THROW(read_weights(path("w.bin").string()), format_error);
}

TEST_F(Harness, CompressLogIsDeterministicAndComplete) {
    const auto c = load_config(path("small.cfg"));
    const auto split = load_split(c);
    const auto a = compress_experiment(c, split);
    const auto b = compress_experiment(c, split);
    EXPECT_EQ(a.file, b.file);
    EXPECT_EQ(compress_log(c, a), compress_log(c, b));
    const std::string log = compress_log(c, a);
    EXPECT_EQ(log.rfind("config coding_goal_nats=", 0), 0u);
    EXPECT_NE(log.find("result blocks=6 k_bits=10"), std::string::npos);
    EXPECT_EQ(a.size.total, a.size.header + 8u);
}

TEST_F(Harness, MalformedConfigExitsTwoNamingField) {
    write("bad.cfg", std::string(small_config) + "learning_rate = quick\n");
    const auto r = cli("compress --config " + q("bad.cfg") + " --out " + q("m.mrc"));
    EXPECT_EQ(r.code, exit_config);
    EXPECT_NE(r.err.find("learning_rate"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(path("m.mrc")));
}

TEST_F(Harness, UnknownOptionExitsTwo) {
    EXPECT_EQ(cli("compress --bogus").code, exit_config);
    EXPECT_EQ(cli("").code, exit_config);
}

TEST_F(Harness, CorruptMagicExitsThree) {
    write("junk.mrc", "JUNKJUNKJUNK");
    const auto r = cli("decompress " + q("junk.mrc") + " --out " + q("w.bin"));
    EXPECT_EQ(r.code, exit_format);
    EXPECT_NE(r.err.find("bad magic"), std::string::npos) << r.err;
}

TEST_F(Harness, CompressDecompressEvalRoundTrip) {
    auto r = cli("compress --config " + q("small.cfg") + " --out " + q("m.mrc"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("blocks=6 k_bits=10"), std::string::npos) << r.out;
    ASSERT_TRUE(fs::exists(path("m.mrc.log")));
    EXPECT_NE(slurp(path("m.mrc.log")).find("encode block="), std::string::npos);

    const auto bytes = read_file_bytes(path("m.mrc").string());
    const auto model = read_model(bytes);
    EXPECT_EQ(bytes.size(), header_bytes(model) + 8u);

    r = cli("decompress " + q("m.mrc") + " --out " + q("w.bin"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto w = read_weights(path("w.bin").string());
    EXPECT_EQ(w.flat, flatten_layers(decompress(model).layers));

    r = cli("eval " + q("w.bin") + " --config " + q("small.cfg"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("examples=100"), std::string::npos) << r.out;
    const auto c = load_config(path("small.cfg"));
    const auto split = load_split(c);
    const auto o = compress_experiment(c, split);
    char expect[64];
    std::snprintf(expect, sizeof expect, "error_pct=%.3f", 100.0 * o.test.error_rate);
    EXPECT_NE(r.out.find(expect), std::string::npos) << r.out;

    r = cli("eval " + q("w.bin") + " --data two_cluster");
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("examples=1000"), std::string::npos) << r.out;

    r = cli("eval " + q("w.bin"));
    EXPECT_EQ(r.code, exit_config);
}

TEST_F(Harness, SeedOverrideChangesOutput) {
    ASSERT_EQ(cli("compress --config " + q("small.cfg") + " --out " + q("a.mrc")).code, 0);
    ASSERT_EQ(cli("compress --config " + q("small.cfg") + " --out " + q("b.mrc") + " --seed-override 5").code, 0);
    ASSERT_EQ(cli("compress --config " + q("small.cfg") + " --out " + q("c.mrc")).code, 0);
    EXPECT_EQ(slurp(path("a.mrc")), slurp(path("c.mrc")));
    EXPECT_EQ(slurp(path("a.mrc.log")), slurp(path("c.mrc.log")));
    EXPECT_NE(slurp(path("a.mrc")), slurp(path("b.mrc")));
    EXPECT_NE(slurp(path("b.mrc.log")).find("root_seed=5 trainer_seed=6"), std::string::npos);
}

TEST_F(Harness, SweepCsvSchema) {
    const auto r = cli("sweep --config " + q("small.cfg") + " --out " + q("s.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("baseline_test_error="), std::string::npos);
    std::istringstream csv(slurp(path("s.csv")));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, sweep_csv_header);
    int rows = 0;
    double prev_c = 0.0;
    while (std::getline(csv, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5);
        const double c = std::stod(line);
        EXPECT_GT(c, prev_c);
        prev_c = c;
    }
    EXPECT_EQ(rows, 2);

    const auto listed = cli("sweep --config " + q("small.cfg") + " --c-nats 20,35,28");
    ASSERT_EQ(listed.code, 0) << listed.err;
    EXPECT_EQ(listed.out.rfind(sweep_csv_header, 0), 0u);
    EXPECT_EQ(std::count(listed.out.begin(), listed.out.end(), '\n'), 4);
    EXPECT_NE(listed.err.find("baseline_test_error="), std::string::npos);
}

TEST_F(Harness, DiagnosticsExitCodes) {
    auto r = cli("diagnostics --diag-trials 200000 --out " + q("diag.txt"));
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("PASS grs_unbiased"), std::string::npos);
    EXPECT_EQ(slurp(path("diag.txt")), r.out);
    r = cli("diagnostics --diag-trials 50");
    EXPECT_EQ(r.code, exit_diagnostics) << r.out;
    EXPECT_NE(r.out.find("FAIL grs_unbiased"), std::string::npos);
    EXPECT_EQ(cli("diagnostics --diag-trials 0").code, exit_config);
}
