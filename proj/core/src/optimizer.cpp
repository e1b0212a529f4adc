// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace fp8lab {

void AdamW::step(std::vector<ParamEntry<float>>& params, double lr, double weight_decay) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (params[i].trainable) {
                m_[i].assign(params[i].tensor.numel(), 0.0f);
                v_[i].assign(params[i].tensor.numel(), 0.0f);
            }
        }
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& entry = params[i];
        if (!entry.trainable) {
            continue;
        }
        auto& value = entry.tensor.data();
        auto& grad = entry.tensor.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        const float decay_mult =
            entry.decay ? static_cast<float>(1.0 - lr * weight_decay) : 1.0f;
        const float b1 = static_cast<float>(beta1_);
        const float b2 = static_cast<float>(beta2_);
        for (std::size_t j = 0; j < value.size(); ++j) {
            const float g = grad[j];
            if (!std::isfinite(g)) {
                throw std::runtime_error("AdamW: non-finite gradient in " + entry.name);
            }
            value[j] *= decay_mult;
            m[j] = b1 * m[j] + (1.0f - b1) * g;
            v[j] = b2 * v[j] + (1.0f - b2) * g * g;
            const double mhat = static_cast<double>(m[j]) / bc1;
            const double vhat = static_cast<double>(v[j]) / bc2;
            value[j] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

double clip_gradients(std::vector<ParamEntry<float>>& params, double max_norm) {
    double sq = 0.0;
    for (auto& entry : params) {
        if (!entry.trainable) continue;
        for (float g : entry.tensor.grad()) {
            sq += static_cast<double>(g) * static_cast<double>(g);
        }
    }
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) {
        throw std::runtime_error("clip_gradients: non-finite gradient norm");
    }
    if (norm > max_norm && norm > 0.0) {
        const float scale = static_cast<float>(max_norm / norm);
        for (auto& entry : params) {
            if (!entry.trainable) continue;
            for (float& g : entry.tensor.grad()) g *= scale;
        }
    }
    return norm;
}

}  // namespace fp8lab
