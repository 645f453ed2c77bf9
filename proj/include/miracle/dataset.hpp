#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "byte_io.hpp"
#include "errors.hpp"
#include "prng.hpp"

namespace miracle {

enum class Task : std::uint8_t { classification = 0, regression = 1 };

/// Row-major inputs with either class labels or real-valued targets.
struct Dataset {
    Task task = Task::classification;
    std::size_t n = 0;
    std::size_t d_in = 0;
    std::size_t d_out = 0;  // number of classes, or target width
    std::vector<double> inputs;
    std::vector<std::uint32_t> labels;  // classification
    std::vector<double> targets;        // regression, n * d_out

    std::span<const double> input(std::size_t i) const { return {inputs.data() + i * d_in, d_in}; }
    std::span<const double> target(std::size_t i) const { return {targets.data() + i * d_out, d_out}; }

    void validate() const {
        if (inputs.size() != n * d_in) throw dimension_error("Dataset: input matrix size mismatch");
        if (task == Task::classification) {
            if (labels.size() != n) throw dimension_error("Dataset: label count mismatch");
            for (auto c : labels)
                if (c >= d_out) throw dimension_error("Dataset: class id out of range");
        } else if (targets.size() != n * d_out) {
            throw dimension_error("Dataset: target matrix size mismatch");
        }
    }

    Dataset subset(std::span<const std::size_t> rows) const {
        Dataset out;
        out.task = task;
        out.n = rows.size();
        out.d_in = d_in;
        out.d_out = d_out;
        for (auto r : rows) {
            auto x = input(r);
            out.inputs.insert(out.inputs.end(), x.begin(), x.end());
            if (task == Task::classification) {
                out.labels.push_back(labels[r]);
            } else {
                auto y = target(r);
                out.targets.insert(out.targets.end(), y.begin(), y.end());
            }
        }
        return out;
    }

    // Concatenation of this set with itself.
    Dataset duplicated() const {
        Dataset out = *this;
        out.n *= 2;
        out.inputs.insert(out.inputs.end(), inputs.begin(), inputs.end());
        out.labels.insert(out.labels.end(), labels.begin(), labels.end());
        out.targets.insert(out.targets.end(), targets.begin(), targets.end());
        return out;
    }
};

struct TrainTestSplit {
    Dataset train;
    Dataset test;
};

// Seeded permutation, then the first (1 - test_fraction) rows train.
inline TrainTestSplit split_dataset(const Dataset& data, double test_fraction, std::uint64_t seed) {
    std::vector<std::size_t> order(data.n);
    for (std::size_t i = 0; i < data.n; ++i) order[i] = i;
    SampleStream stream(seed, 0xD5);
    for (std::size_t i = data.n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(stream, i)]);
    const auto n_test = static_cast<std::size_t>(static_cast<double>(data.n) * test_fraction + 0.5);
    const std::span<const std::size_t> all(order);
    return {data.subset(all.first(data.n - n_test)), data.subset(all.last(n_test))};
}

/// Two Gaussian clusters in 2-D with centers +-(1.5, 1.5) and std 0.75;
/// labels alternate 0, 1, 0, ...
inline Dataset make_two_cluster(std::size_t n = 1000, std::uint64_t seed = 20190306) {
    Dataset d;
    d.task = Task::classification;
    d.n = n;
    d.d_in = 2;
    d.d_out = 2;
    SampleStream stream(seed, 0xC1);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t c = static_cast<std::uint32_t>(i % 2);
        const double sign = c == 0 ? -1.0 : 1.0;
        d.inputs.push_back(sign * 1.5 + 0.75 * standard_normal(stream));
        d.inputs.push_back(sign * 1.5 + 0.75 * standard_normal(stream));
        d.labels.push_back(c);
    }
    return d;
}

/// y = a.x + b + noise_std * N(0,1), x ~ N(0, I).
inline Dataset make_linear_regression(std::size_t n, std::span<const double> a, double b, double noise_std,
                                      std::uint64_t seed) {
    Dataset d;
    d.task = Task::regression;
    d.n = n;
    d.d_in = a.size();
    d.d_out = 1;
    SampleStream stream(seed, 0xA7);
    for (std::size_t i = 0; i < n; ++i) {
        double y = b;
        for (double ai : a) {
            const double x = standard_normal(stream);
            d.inputs.push_back(x);
            y += ai * x;
        }
        d.targets.push_back(y + noise_std * standard_normal(stream));
    }
    return d;
}

// Text table: one header row, comma separated, last column is the target.
inline Dataset parse_csv(std::istream& in, Task task) {
    Dataset d;
    d.task = task;
    std::string line;
    if (!std::getline(in, line)) throw error("csv: missing header row");
    const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    if (columns < 2) throw error("csv: need at least one input column and a target column");
    d.d_in = columns - 1;
    std::size_t row = 1;
    std::uint32_t max_label = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> values;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                throw error("csv: row " + std::to_string(row) + ": not a number: '" + cell + "'");
            }
        }
        if (values.size() != columns) throw error("csv: row " + std::to_string(row) + ": wrong column count");
        d.inputs.insert(d.inputs.end(), values.begin(), values.end() - 1);
        if (task == Task::classification) {
            const double t = values.back();
            if (t < 0 || t != static_cast<double>(static_cast<std::uint32_t>(t))) {
                throw error("csv: row " + std::to_string(row) + ": class id must be a non-negative integer");
            }
            d.labels.push_back(static_cast<std::uint32_t>(t));
            max_label = std::max(max_label, d.labels.back());
        } else {
            d.targets.push_back(values.back());
        }
        ++d.n;
    }
    d.d_out = task == Task::classification ? max_label + 1 : 1;
    d.validate();
    return d;
}

inline Dataset load_csv(const std::string& path, Task task) {
    std::ifstream in(path);
    if (!in) throw error("cannot open '" + path + "'");
    return parse_csv(in, task);
}

// Binary fixture: "MRDS", version u8 = 1, task u8, n u32, d_in u32, d_out u32,
// inputs as f32, then u32 labels or f32 targets. Little-endian.
inline std::vector<std::uint8_t> write_fixture(const Dataset& d) {
    d.validate();
    ByteWriter w;
    w.tag("MRDS");
    w.u8(1);
    w.u8(static_cast<std::uint8_t>(d.task));
    w.u32(static_cast<std::uint32_t>(d.n));
    w.u32(static_cast<std::uint32_t>(d.d_in));
    w.u32(static_cast<std::uint32_t>(d.d_out));
    for (double x : d.inputs) w.f32(static_cast<float>(x));
    if (d.task == Task::classification) {
        for (auto c : d.labels) w.u32(c);
    } else {
        for (double y : d.targets) w.f32(static_cast<float>(y));
    }
    return std::move(w).take();
}

inline Dataset read_fixture(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (!r.tag_equals("MRDS")) throw format_error(format_errc::bad_magic, "not a dataset fixture");
    if (r.u8() != 1) throw format_error(format_errc::unknown_version, "dataset fixture version");
    Dataset d;
    const auto task = r.u8();
    if (task > 1) throw format_error(format_errc::corrupt, "dataset task id");
    d.task = static_cast<Task>(task);
    d.n = r.u32();
    d.d_in = r.u32();
    d.d_out = r.u32();
    d.inputs.resize(d.n * d.d_in);
    for (double& x : d.inputs) x = r.f32();
    if (d.task == Task::classification) {
        d.labels.resize(d.n);
        for (auto& c : d.labels) c = r.u32();
    } else {
        d.targets.resize(d.n * d.d_out);
        for (double& y : d.targets) y = r.f32();
    }
    try {
        d.validate();
    } catch (const dimension_error& e) {
        throw format_error(format_errc::corrupt, e.what());
    }
    return d;
}

inline Dataset load_fixture(const std::string& path) { return read_fixture(read_file_bytes(path)); }

}  // namespace miracle
