#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "miracle/config.hpp"

using namespace miracle;

namespace {

std::string field_of(const std::string& text) {
    try {
        parse_config_string(text);
    } catch (const config_error& e) {
        return e.field();
    }
    return "";
}

}  // namespace

TEST(Config, DefaultsWithoutKeys) {
    const auto c = parse_config_string("# nothing\n\n");
    EXPECT_EQ(c.spec.layer_sizes, (std::vector<std::uint32_t>{2, 44, 40, 2}));
    EXPECT_EQ(c.dataset, "two_cluster");
    EXPECT_EQ(c.effective_baseline_steps(), c.train.initial_iterations);
}

TEST(Config, ParsesEveryKey) {
    const auto c = parse_config_string(R"(
coding_goal_bits = 100   # C
local_goal_nats = 5
initial_iterations = 123
intermediate_iterations = 7
eps_beta0 = 1e-4
eps_beta = 2.5e-3
learning_rate = 0.01
batch_size = 32
root_seed = 0x10
trainer_seed = 99
init_log_std = -4
log_every = 10
layers = 3, 8, 4
activation = relu
task = classification
hash_buckets = 20, 0
hash_seed = 500
dataset = data/x.csv
dataset_size = 50
dataset_seed = 3
test_fraction = 0.25
split_seed = 11
baseline_steps = 42
sweep_multipliers = 0.5, 1
)");
    EXPECT_NEAR(c.train.coding_goal_nats, 100 * std::log(2.0), 1e-12);
    EXPECT_EQ(c.train.local_goal_nats, 5.0);
    EXPECT_EQ(c.train.initial_iterations, 123u);
    EXPECT_EQ(c.train.intermediate_iterations, 7u);
    EXPECT_EQ(c.train.eps_beta0, 1e-4);
    EXPECT_EQ(c.train.eps_beta, 2.5e-3);
    EXPECT_EQ(c.train.learning_rate, 0.01);
    EXPECT_EQ(c.train.batch_size, 32u);
    EXPECT_EQ(c.train.root_seed, 16u);
    EXPECT_EQ(c.train.trainer_seed, 99u);
    EXPECT_EQ(c.train.init_log_std, -4.0);
    EXPECT_EQ(c.train.log_every, 10u);
    EXPECT_EQ(c.spec.layer_sizes, (std::vector<std::uint32_t>{3, 8, 4}));
    EXPECT_EQ(c.spec.activation, Activation::relu);
    ASSERT_TRUE(c.spec.layer_hash(0).has_value());
    EXPECT_EQ(c.spec.layer_hash(0)->bucket_count, 20u);
    EXPECT_EQ(c.spec.layer_hash(0)->hash_seed, 500u);
    EXPECT_FALSE(c.spec.layer_hash(1).has_value());
    EXPECT_EQ(c.dataset, "data/x.csv");
    EXPECT_EQ(c.dataset_size, 50u);
    EXPECT_EQ(c.dataset_seed, 3u);
    EXPECT_EQ(c.test_fraction, 0.25);
    EXPECT_EQ(c.split_seed, 11u);
    EXPECT_EQ(c.effective_baseline_steps(), 42u);
    EXPECT_EQ(c.sweep_multipliers, (std::vector<double>{0.5, 1.0}));
}

TEST(Config, ErrorsNameTheField) {
    EXPECT_EQ(field_of("learning_rate = fast\n"), "learning_rate");
    EXPECT_EQ(field_of("batch_size = -3\n"), "batch_size");
    EXPECT_EQ(field_of("batch_size = 0\n"), "batch_size");
    EXPECT_EQ(field_of("layers = 2, x, 2\n"), "layers");
    EXPECT_EQ(field_of("layers = 2, 0, 2\n"), "layers");
    EXPECT_EQ(field_of("activation = sigmoid\n"), "activation");
    EXPECT_EQ(field_of("task = ranking\n"), "task");
    EXPECT_EQ(field_of("eps_beta = 0\n"), "eps_beta");
    EXPECT_EQ(field_of("test_fraction = 1.5\n"), "test_fraction");
    EXPECT_EQ(field_of("hash_buckets = 1\n"), "hash_buckets");
    EXPECT_EQ(field_of("hash_buckets = 100000, 0, 0\n"), "hash");
    EXPECT_EQ(field_of("local_goal_bits = 40\ncoding_goal_bits = 20\n"), "coding_goal");
    EXPECT_EQ(field_of("local_goal_bits = 31\ncoding_goal_bits = 600\n"), "local_goal");
    EXPECT_EQ(field_of("layers = 1, 1\ncoding_goal_bits = 100\nlocal_goal_bits = 10\n"), "coding_goal");
    EXPECT_EQ(field_of("sweep_multipliers = 1, -1\n"), "sweep_multipliers");
    EXPECT_EQ(field_of("eps_beta = nan\n"), "eps_beta");
    EXPECT_EQ(field_of("root_seed = 12abc\n"), "root_seed");
    EXPECT_EQ(field_of("dataset =\n"), "dataset");
}

TEST(Config, UnknownAndDuplicateKeys) {
    EXPECT_EQ(field_of("learnin_rate = 0.1\n"), "learnin_rate");
    EXPECT_EQ(field_of("batch_size = 4\nbatch_size = 8\n"), "batch_size");
    EXPECT_EQ(field_of("coding_goal_bits = 100\ncoding_goal_nats = 70\n"), "coding_goal_nats");
    EXPECT_EQ(field_of("just some words\n"), "just some words");
}

TEST(Config, MessageCarriesFieldName) {
    try {
        parse_config_string("init_log_std = low\n");
        FAIL();
    } catch (const config_error& e) {
        EXPECT_NE(std::string(e.what()).find("init_log_std"), std::string::npos);
    }
}

TEST(Config, BundledConfigsParseAndLoadData) {
    for (const auto& entry : std::filesystem::directory_iterator(std::string(MIRACLE_SOURCE_DIR) + "/configs")) {
        if (entry.path().extension() != ".cfg") continue;
        SCOPED_TRACE(entry.path().string());
        const auto c = load_config(entry.path());
        const auto d = load_experiment_data(c);
        EXPECT_EQ(d.d_in, c.spec.layer_sizes.front());
        EXPECT_EQ(d.d_out, c.spec.layer_sizes.back());
    }
}

TEST(Config, ToyConfigValues) {
    const auto c = load_config(std::string(MIRACLE_SOURCE_DIR) + "/configs/toy_two_cluster.cfg");
    EXPECT_EQ(block_count_for(c.train.coding_goal_nats, c.train.local_goal_nats), 25u);
    EXPECT_EQ(required_index_bits(c.train.local_goal_nats), 20u);
    EXPECT_EQ(c.spec.n_weights(), 2014u);
}

TEST(Config, DatasetChecks) {
    const auto dir = std::filesystem::temp_directory_path() / "miracle_config_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "reg.csv") << "a,b,y\n1,2,0.5\n3,4,1.5\n";
    }
    auto cfg = [&](const std::string& body) {
        std::ofstream(dir / "c.cfg") << body;
        return load_config(dir / "c.cfg");
    };
    auto field = [&](const std::string& body) {
        try {
            load_experiment_data(cfg(body));
        } catch (const config_error& e) {
            return e.field();
        }
        return std::string();
    };
    const auto ok = load_experiment_data(cfg("dataset = reg.csv\ntask = regression\nlayers = 2, 4, 1\n"
                                             "coding_goal_bits = 20\nlocal_goal_bits = 10\n"));
    EXPECT_EQ(ok.n, 2u);
    EXPECT_EQ(field("dataset = reg.csv\ntask = regression\nlayers = 3, 4, 1\ncoding_goal_bits = 20\nlocal_goal_bits = 10\n"),
              "layers");
    EXPECT_EQ(field("dataset = reg.csv\ntask = regression\nlayers = 2, 4, 2\ncoding_goal_bits = 20\nlocal_goal_bits = 10\n"),
              "layers");
    EXPECT_EQ(field("dataset = missing.csv\n"), "dataset");
    EXPECT_EQ(field("layers = 2, 4, 3\n"), "");  // unused classes are allowed
    EXPECT_EQ(field("dataset = two_cluster\ntask = regression\nlayers = 2, 4, 2\ncoding_goal_bits = 20\nlocal_goal_bits = 10\n"), "task");
    std::filesystem::remove_all(dir);
}
