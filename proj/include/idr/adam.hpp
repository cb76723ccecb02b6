#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "idr/errors.hpp"
#include "idr/tensor.hpp"

namespace idr {

struct AdamHyper {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam. Moment buffers are laid out per parameter and
/// allocated on the first step.
template <typename T>
struct AdamState {
    AdamHyper hp;
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    std::int64_t t = 0;
};

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, const std::vector<std::vector<T>>& grads,
               AdamState<T>& state) {
    if (params.size() != grads.size())
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " params vs " +
                         std::to_string(grads.size()) + " grads");
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].v.size(), T(0));
            state.v[i].assign(params[i].v.size(), T(0));
        }
    }
    state.t += 1;
    const T b1 = static_cast<T>(state.hp.beta1);
    const T b2 = static_cast<T>(state.hp.beta2);
    const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(state.hp.beta1, static_cast<double>(state.t))));
    const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(state.hp.beta2, static_cast<double>(state.t))));
    const T lr = static_cast<T>(state.hp.lr);
    const T eps = static_cast<T>(state.hp.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].size() != params[i].v.size())
            throw ShapeError("adam_step: grad size mismatch at parameter " + std::to_string(i));
        auto& p = params[i].v;
        auto& m = state.m[i];
        auto& v = state.v[i];
        const auto& g = grads[i];
        for (std::size_t e = 0; e < p.size(); ++e) {
            if (!std::isfinite(static_cast<double>(g[e])))
                throw NumericError("adam_step: non-finite gradient at parameter " + std::to_string(i) +
                                   " element " + std::to_string(e));
            m[e] = b1 * m[e] + (T(1) - b1) * g[e];
            v[e] = b2 * v[e] + (T(1) - b2) * g[e] * g[e];
            p[e] -= lr * (m[e] * c1) / (std::sqrt(v[e] * c2) + eps);
        }
    }
}

}  // namespace idr
