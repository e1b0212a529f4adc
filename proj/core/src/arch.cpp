// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/arch.hpp"

#include <cmath>
#include <stdexcept>

namespace fp8lab {

const char* to_string(NormKind k) {
    switch (k) {
        case NormKind::identity: return "identity";
        case NormKind::rmsnorm: return "rmsnorm";
        case NormKind::layerscale: return "layerscale";
    }
    return "?";
}

const char* to_string(QkRegKind k) {
    switch (k) {
        case QkRegKind::identity: return "identity";
        case QkRegKind::rmsnorm_trainable: return "rmsnorm";
        case QkRegKind::rmsnorm_frozen: return "rmsnorm-frozen";
        case QkRegKind::tanh_alpha: return "tanh-alpha";
    }
    return "?";
}

bool is_glu(ActKind k) { return k == ActKind::swiglu || k == ActKind::smooth_swiglu; }

const std::vector<ArchitectureSpec>& all_architectures() {
    static const std::vector<ArchitectureSpec> archs = [] {
        std::vector<ArchitectureSpec> a;
        // name, scaled_input, final, pre, post, qk, act, post_sqrtL, qk_train, folded_s
        a.push_back({"llama", false, NormKind::rmsnorm, NormKind::rmsnorm, NormKind::identity,
                     QkRegKind::identity, ActKind::swiglu, false, false, false});
        a.push_back({"llama-smoothswiglu", false, NormKind::rmsnorm, NormKind::rmsnorm,
                     NormKind::identity, QkRegKind::identity, ActKind::smooth_swiglu, false, false,
                     false});
        a.push_back({"olmo2", false, NormKind::rmsnorm, NormKind::identity, NormKind::rmsnorm,
                     QkRegKind::rmsnorm_trainable, ActKind::swiglu, false, true, false});
        a.push_back({"op", true, NormKind::identity, NormKind::identity, NormKind::layerscale,
                     QkRegKind::rmsnorm_trainable, ActKind::gelu, true, true, false});
        a.push_back({"fog-max", true, NormKind::identity, NormKind::identity, NormKind::rmsnorm,
                     QkRegKind::rmsnorm_frozen, ActKind::xielu, true, false, true});
        a.push_back({"fog-opt", true, NormKind::identity, NormKind::identity, NormKind::rmsnorm,
                     QkRegKind::rmsnorm_frozen, ActKind::gelu, true, false, true});
        a.push_back({"fog-flash", true, NormKind::identity, NormKind::identity, NormKind::rmsnorm,
                     QkRegKind::tanh_alpha, ActKind::gelu, true, false, true});
        return a;
    }();
    return archs;
}

const ArchitectureSpec& architecture_by_name(const std::string& name) {
    for (const auto& a : all_architectures()) {
        if (a.name == name) {
            return a;
        }
    }
    throw std::invalid_argument("unknown architecture: " + name);
}

double effective_softmax_scale(double gamma0, int d_qk) {
    if (gamma0 <= 0.0 || d_qk <= 0) {
        throw std::invalid_argument("effective_softmax_scale: inputs must be positive");
    }
    return gamma0 * gamma0 / std::sqrt(static_cast<double>(d_qk));
}

double ModelConfig::effective_scale(const ArchitectureSpec& spec) const {
    if (softmax_scale != 0.0) {
        return softmax_scale;
    }
    if (spec.folded_softmax_scale) {
        return effective_softmax_scale(std::sqrt(qk_gamma_sq), head_dim());
    }
    return 1.0 / std::sqrt(static_cast<double>(head_dim()));
}

void ModelConfig::validate(const ArchitectureSpec& spec) const {
    if (layers <= 0 || hidden <= 0 || ffn_hidden <= 0 || heads <= 0 || qk_groups <= 0 ||
        vocab <= 0 || context <= 0) {
        throw std::invalid_argument("model config: dimensions must be positive");
    }
    if (hidden % heads != 0) {
        throw std::invalid_argument("model config: hidden must be divisible by heads");
    }
    if (heads % qk_groups != 0) {
        throw std::invalid_argument("model config: heads must be divisible by qk_groups");
    }
    if (head_dim() % 2 != 0) {
        throw std::invalid_argument("model config: head dimension must be even");
    }
    if (!is_glu(spec.activation) && ffn_hidden % 2 != 0) {
        throw std::invalid_argument("model config: ffn_hidden must be even for the 1.5x width");
    }
    if (init_std <= 0.0) {
        throw std::invalid_argument("model config: init_std must be positive");
    }
    if (qk_gamma_sq <= 0.0) {
        throw std::invalid_argument("model config: qk_gamma_sq must be positive");
    }
}

ParamCountBreakdown param_count(const ArchitectureSpec& spec, const ModelConfig& c) {
    c.validate(spec);
    ParamCountBreakdown out;
    const long long d = c.hidden;
    const long long dh = c.head_dim();
    const long long q_width = static_cast<long long>(c.heads) * dh;
    const long long kv_width = static_cast<long long>(c.qk_groups) * dh;

    out.embedding = static_cast<long long>(c.vocab) * d;
    out.head = c.tied_embeddings ? 0 : static_cast<long long>(c.vocab) * d;

    const long long attn_per_layer = d * q_width + 2 * d * kv_width + q_width * d;
    out.attention = attn_per_layer * c.layers;

    long long ffn_per_layer;
    if (is_glu(spec.activation)) {
        ffn_per_layer = 3LL * d * c.ffn_hidden;
    } else {
        ffn_per_layer = 2LL * d * c.ffn_inner(spec);
    }
    if (spec.activation == ActKind::xielu) {
        ffn_per_layer += 2;  // trainable alpha_p, alpha_n
    }
    out.ffn = ffn_per_layer * c.layers;

    long long norms_per_layer = 0;
    if (spec.n_pre == NormKind::rmsnorm) norms_per_layer += 2 * d;
    if (spec.n_post != NormKind::identity) norms_per_layer += 2 * d;
    if (spec.n_qk == QkRegKind::rmsnorm_trainable) norms_per_layer += 2 * dh;
    if (spec.n_qk == QkRegKind::tanh_alpha && spec.qk_gains_trainable) norms_per_layer += 2;
    out.norms = norms_per_layer * c.layers;
    if (spec.n_final == NormKind::rmsnorm) out.norms += d;
    return out;
}

}  // namespace fp8lab
