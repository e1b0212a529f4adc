// SPDX-License-Identifier: Apache-2.0
//
// The architecture family: each named variant is one row of slots
// (input scaling, final/pre/post normalization, QK regularizer, activation)
// over a shared transformer block skeleton.

#pragma once

#include <string>
#include <vector>

#include "fp8lab/ops.hpp"

namespace fp8lab {

enum class NormKind { identity, rmsnorm, layerscale };
enum class QkRegKind { identity, rmsnorm_trainable, rmsnorm_frozen, tanh_alpha };

const char* to_string(NormKind k);
const char* to_string(QkRegKind k);

struct ArchitectureSpec {
    std::string name;
    bool scaled_input = false;  // embedding output multiplied by 1/init_std
    NormKind n_final = NormKind::identity;
    NormKind n_pre = NormKind::identity;
    NormKind n_post = NormKind::identity;
    QkRegKind n_qk = QkRegKind::identity;
    ActKind activation = ActKind::gelu;
    bool post_gain_sqrt_layers = false;  // post gains initialized to 1/sqrt(L)
    bool qk_gains_trainable = false;
    bool folded_softmax_scale = false;  // frozen QK gain folded into s
};

const std::vector<ArchitectureSpec>& all_architectures();
const ArchitectureSpec& architecture_by_name(const std::string& name);

bool is_glu(ActKind k);

struct ModelConfig {
    int layers = 4;
    int hidden = 128;
    int ffn_hidden = 512;  // per-branch projection width of gated FFNs
    int heads = 4;
    int qk_groups = 2;  // number of shared K/V heads
    int vocab = 257;
    int context = 256;
    bool tied_embeddings = true;
    double init_std = 0.02;
    double softmax_scale = 0.0;  // 0 = architecture default
    double rope_base = 10000.0;
    double rms_eps = 1e-6;
    double qk_gamma_sq = 2.0;  // squared frozen gain folded into s

    int head_dim() const { return hidden / heads; }
    // Non-gated FFNs get 1.5x the width so parameter counts match.
    int ffn_inner(const ArchitectureSpec& spec) const {
        return is_glu(spec.activation) ? ffn_hidden : ffn_hidden + ffn_hidden / 2;
    }
    double effective_scale(const ArchitectureSpec& spec) const;
    void validate(const ArchitectureSpec& spec) const;  // throws on inconsistency
};

// gamma0^2 / sqrt(d_qk): the softmax temperature that makes unit-gain QK
// RMSNorm equivalent to gamma0-gain QK RMSNorm.
double effective_softmax_scale(double gamma0, int d_qk);

struct ParamCountBreakdown {
    long long embedding = 0;
    long long attention = 0;
    long long ffn = 0;
    long long norms = 0;
    long long head = 0;
    long long total() const { return embedding + attention + ffn + norms + head; }
};

// Exact trainable-parameter count, itemized.
ParamCountBreakdown param_count(const ArchitectureSpec& spec, const ModelConfig& config);

}  // namespace fp8lab
