// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference gradient oracle. Rebuilds the forward graph per
// evaluation; leaf tensors are shared so perturbing their data perturbs the
// next forward pass.

#pragma once

#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "fp8lab/tensor.hpp"

namespace fp8lab::testing {

struct GradCheckOptions {
    double step = 1e-4;
    double tolerance = 1e-3;
    std::size_t max_coords_per_tensor = 64;  // sample large tensors
    std::uint64_t sample_seed = 1234;
};

// `build` must construct the scalar loss from the given leaves each call.
template <class BuildFn>
void check_gradients(BuildFn&& build, std::vector<Tensor<double>> leaves,
                     GradCheckOptions opts = {}) {
    for (auto& leaf : leaves) {
        leaf.set_requires_grad(true);
        leaf.zero_grad();
    }
    Tensor<double> loss = build();
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (auto& leaf : leaves) {
        analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());
    }

    std::mt19937_64 rng(opts.sample_seed);
    for (std::size_t t = 0; t < leaves.size(); ++t) {
        auto& data = leaves[t].data();
        std::vector<std::size_t> coords(data.size());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        if (coords.size() > opts.max_coords_per_tensor) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(opts.max_coords_per_tensor);
        }
        for (std::size_t i : coords) {
            const double orig = data[i];
            data[i] = orig + opts.step;
            const double up = build().item();
            data[i] = orig - opts.step;
            const double down = build().item();
            data[i] = orig;
            const double fd = (up - down) / (2.0 * opts.step);
            const double an = analytic[t][i];
            const double denom = std::max({1.0, std::fabs(fd), std::fabs(an)});
            INFO("tensor ", t, " coord ", i, " analytic ", an, " fd ", fd);
            CHECK(std::fabs(an - fd) / denom <= opts.tolerance);
        }
    }
}

}  // namespace fp8lab::testing
