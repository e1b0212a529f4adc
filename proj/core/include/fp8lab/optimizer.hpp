// SPDX-License-Identifier: Apache-2.0
//
// AdamW with decoupled weight decay applied before the moment update, and
// global-norm gradient clipping. Norm gains and activation scalars are
// registered with decay=false and are never decayed.

#pragma once

#include <cstdint>
#include <vector>

#include "fp8lab/model.hpp"

namespace fp8lab {

class AdamW {
public:
    AdamW(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // One update over the trainable parameters. Throws std::runtime_error
    // naming the parameter if a gradient is not finite.
    void step(std::vector<ParamEntry<float>>& params, double lr, double weight_decay);

    std::int64_t step_count() const { return step_count_; }
    double beta1() const { return beta1_; }
    double beta2() const { return beta2_; }
    double eps() const { return eps_; }

    std::vector<std::vector<float>>& first_moments() { return m_; }
    std::vector<std::vector<float>>& second_moments() { return v_; }
    const std::vector<std::vector<float>>& first_moments() const { return m_; }
    const std::vector<std::vector<float>>& second_moments() const { return v_; }
    void set_step_count(std::int64_t t) { step_count_ = t; }

private:
    double beta1_, beta2_, eps_;
    std::int64_t step_count_ = 0;
    std::vector<std::vector<float>> m_;  // indexed like the params vector
    std::vector<std::vector<float>> v_;
};

// Scales all trainable gradients so the global L2 norm is at most max_norm.
// Returns the pre-clip norm. Throws std::runtime_error on a non-finite norm.
double clip_gradients(std::vector<ParamEntry<float>>& params, double max_norm);

}  // namespace fp8lab
