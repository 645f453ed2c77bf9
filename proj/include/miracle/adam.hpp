#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace miracle {

struct AdamSettings {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Moments for one parameter group. Gradient *ascent*: parameters move along
// the gradient of the objective.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

namespace detail {
inline void check_finite(std::span<const double> g, std::string_view name) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i])) {
            throw numeric_error("non-finite gradient for parameter '" + std::string(name) + "' at index " +
                                std::to_string(i));
        }
    }
}
}  // namespace detail

inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
                      const AdamSettings& s, std::string_view name = "params") {
    require_same_dim(params.size(), grads.size(), "adam_step");
    require_same_dim(params.size(), state.m.size(), "adam_step moments");
    detail::check_finite(grads, name);
    ++state.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = s.beta1 * state.m[i] + (1.0 - s.beta1) * grads[i];
        state.v[i] = s.beta2 * state.v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
        params[i] += s.learning_rate * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + s.epsilon);
    }
}

/// Update only params[index[k]] with grads[k]; other coordinates and their
/// moments are left untouched.
inline void adam_step_sparse(AdamState& state, std::span<double> params, std::span<const std::size_t> index,
                             std::span<const double> grads, const AdamSettings& s, std::string_view name = "params") {
    require_same_dim(index.size(), grads.size(), "adam_step_sparse");
    require_same_dim(params.size(), state.m.size(), "adam_step_sparse moments");
    detail::check_finite(grads, name);
    ++state.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < index.size(); ++k) {
        const std::size_t i = index[k];
        state.m[i] = s.beta1 * state.m[i] + (1.0 - s.beta1) * grads[k];
        state.v[i] = s.beta2 * state.v[i] + (1.0 - s.beta2) * grads[k] * grads[k];
        params[i] += s.learning_rate * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + s.epsilon);
    }
}

}  // namespace miracle
