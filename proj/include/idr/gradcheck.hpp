#pragma once

// Central finite-difference oracle for the analytic gradients. Meant to run
// in double precision; the perturbation step defaults to the contract value
// 1e-3.

#include <cmath>
#include <functional>
#include <vector>

#include "idr/autograd.hpp"
#include "idr/tensor.hpp"

namespace idr {

template <typename T>
using GraphBuilder = std::function<int(Tape<T>&, const std::vector<int>&)>;

/// Compares analytic gradients of the scalar built by `build` against
/// central finite differences and returns the worst relative error over all
/// parameter elements. `corrupt`, when set, mutates the analytic gradients
/// before comparison (fault-injection hook for the negative test).
template <typename T>
double grad_check(const std::vector<Tensor<T>>& params, const GraphBuilder<T>& build, T step = T(1e-3),
                  const std::function<void(std::vector<std::vector<T>>&)>& corrupt = nullptr) {
    auto eval = [&](const std::vector<Tensor<T>>& p) -> T {
        Tape<T> tape(/*record=*/false);
        std::vector<int> ids;
        ids.reserve(p.size());
        for (const auto& t : p) ids.push_back(tape.leaf(t));
        return tape.val(build(tape, ids)).v[0];
    };

    // Analytic side.
    std::vector<std::vector<T>> analytic;
    {
        Tape<T> tape;
        std::vector<int> ids;
        ids.reserve(params.size());
        for (const auto& t : params) ids.push_back(tape.leaf(t));
        const int root = build(tape, ids);
        tape.backward(root);
        for (int id : ids) {
            auto& g = tape.grad(id);
            analytic.push_back(g.empty() ? std::vector<T>(tape.val(id).v.size(), T(0)) : g);
        }
    }
    if (corrupt) corrupt(analytic);

    std::vector<Tensor<T>> work = params;
    double worst = 0.0;
    for (std::size_t pi = 0; pi < work.size(); ++pi) {
        for (std::size_t e = 0; e < work[pi].v.size(); ++e) {
            const T saved = work[pi].v[e];
            work[pi].v[e] = saved + step;
            const double fp = static_cast<double>(eval(work));
            work[pi].v[e] = saved - step;
            const double fm = static_cast<double>(eval(work));
            work[pi].v[e] = saved;
            const double numeric = (fp - fm) / (2.0 * static_cast<double>(step));
            const double a = static_cast<double>(analytic[pi][e]);
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace idr
