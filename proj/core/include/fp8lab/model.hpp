// SPDX-License-Identifier: Apache-2.0
//
// Decoder-only model assembled from an ArchitectureSpec: optional input
// scaling, L transformer blocks (grouped-query attention with a QK
// regularizer and RoPE, FFN with the spec's activation, pre/post norm
// slots), an optional final norm, and the output head. Every GEMM carries a
// named precision role; the output head has its own role class so the policy
// can keep it out of FP8.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fp8lab/arch.hpp"
#include "fp8lab/gemm.hpp"
#include "fp8lab/ops.hpp"
#include "fp8lab/probes.hpp"
#include "fp8lab/tensor.hpp"

namespace fp8lab {

template <class Real>
struct ParamEntry {
    std::string name;
    Tensor<Real> tensor;
    bool trainable = true;
    bool decay = true;
    std::string component;  // embedding | attention | ffn | norm | head
};

template <class Real>
class Model {
public:
    Model(const ArchitectureSpec& spec, const ModelConfig& config,
          std::shared_ptr<GemmContext<Real>> gemm_ctx, std::uint64_t seed)
        : spec_(spec), cfg_(config), ctx_(std::move(gemm_ctx)) {
        cfg_.validate(spec_);
        std::mt19937_64 rng(seed);
        const Real std_dev = static_cast<Real>(cfg_.init_std);
        const int d = cfg_.hidden;
        const int dh = cfg_.head_dim();
        const int qw = cfg_.heads * dh;
        const int kvw = cfg_.qk_groups * dh;

        embedding_ = Tensor<Real>::randn({cfg_.vocab, d}, std_dev, rng);
        register_param("embedding.weight", embedding_, true, true, "embedding");

        const Real post_init = spec_.post_gain_sqrt_layers
                                   ? static_cast<Real>(1.0 / std::sqrt(cfg_.layers))
                                   : Real(1);
        blocks_.resize(static_cast<std::size_t>(cfg_.layers));
        for (int l = 0; l < cfg_.layers; ++l) {
            Block& b = blocks_[static_cast<std::size_t>(l)];
            const std::string p = "blocks." + std::to_string(l) + ".";
            b.wq = Tensor<Real>::randn({d, qw}, std_dev, rng);
            b.wk = Tensor<Real>::randn({d, kvw}, std_dev, rng);
            b.wv = Tensor<Real>::randn({d, kvw}, std_dev, rng);
            b.wo = Tensor<Real>::randn({qw, d}, std_dev, rng);
            register_param(p + "attn.wq", b.wq, true, true, "attention");
            register_param(p + "attn.wk", b.wk, true, true, "attention");
            register_param(p + "attn.wv", b.wv, true, true, "attention");
            register_param(p + "attn.wo", b.wo, true, true, "attention");

            const int inner = cfg_.ffn_inner(spec_);
            if (is_glu(spec_.activation)) {
                b.ffn_gate = Tensor<Real>::randn({d, inner}, std_dev, rng);
                b.ffn_up = Tensor<Real>::randn({d, inner}, std_dev, rng);
                b.ffn_down = Tensor<Real>::randn({inner, d}, std_dev, rng);
                register_param(p + "ffn.gate", b.ffn_gate, true, true, "ffn");
                register_param(p + "ffn.up", b.ffn_up, true, true, "ffn");
                register_param(p + "ffn.down", b.ffn_down, true, true, "ffn");
            } else {
                b.ffn_up = Tensor<Real>::randn({d, inner}, std_dev, rng);
                b.ffn_down = Tensor<Real>::randn({inner, d}, std_dev, rng);
                register_param(p + "ffn.up", b.ffn_up, true, true, "ffn");
                register_param(p + "ffn.down", b.ffn_down, true, true, "ffn");
            }
            if (spec_.activation == ActKind::xielu) {
                // softplus(0.2327) is about 0.8, the customary starting slope
                b.act_alpha_p = Tensor<Real>::full({1}, static_cast<Real>(0.2327));
                b.act_alpha_n = Tensor<Real>::full({1}, static_cast<Real>(0.8));
                register_param(p + "ffn.alpha_p", b.act_alpha_p, true, false, "ffn");
                register_param(p + "ffn.alpha_n", b.act_alpha_n, true, false, "ffn");
            }

            if (spec_.n_pre == NormKind::rmsnorm) {
                b.pre_attn_gains = Tensor<Real>::full({d}, Real(1));
                b.pre_ffn_gains = Tensor<Real>::full({d}, Real(1));
                register_param(p + "pre_attn_norm.gains", b.pre_attn_gains, true, false, "norm");
                register_param(p + "pre_ffn_norm.gains", b.pre_ffn_gains, true, false, "norm");
            }
            if (spec_.n_post != NormKind::identity) {
                b.post_attn_gains = Tensor<Real>::full({d}, post_init);
                b.post_ffn_gains = Tensor<Real>::full({d}, post_init);
                register_param(p + "post_attn_norm.gains", b.post_attn_gains, true, false, "norm");
                register_param(p + "post_ffn_norm.gains", b.post_ffn_gains, true, false, "norm");
            }
            if (spec_.n_qk == QkRegKind::rmsnorm_trainable) {
                b.qk_q_gains = Tensor<Real>::full({dh}, Real(1));
                b.qk_k_gains = Tensor<Real>::full({dh}, Real(1));
                register_param(p + "qk_norm.q_gains", b.qk_q_gains, true, false, "norm");
                register_param(p + "qk_norm.k_gains", b.qk_k_gains, true, false, "norm");
            }
            if (spec_.n_qk == QkRegKind::tanh_alpha && spec_.qk_gains_trainable) {
                b.qk_q_alpha = Tensor<Real>::full({1}, static_cast<Real>(tanh_alpha_init));
                b.qk_k_alpha = Tensor<Real>::full({1}, static_cast<Real>(tanh_alpha_init));
                register_param(p + "qk_tanh.q_alpha", b.qk_q_alpha, true, false, "norm");
                register_param(p + "qk_tanh.k_alpha", b.qk_k_alpha, true, false, "norm");
            }
        }

        if (spec_.n_final == NormKind::rmsnorm) {
            final_gains_ = Tensor<Real>::full({d}, Real(1));
            register_param("final_norm.gains", final_gains_, true, false, "norm");
        }
        if (!cfg_.tied_embeddings) {
            head_ = Tensor<Real>::randn({d, cfg_.vocab}, std_dev, rng);
            register_param("lm_head.weight", head_, true, true, "head");
        }
    }

    // ids laid out row-major (batch, seq); returns (batch, seq, vocab) logits.
    Tensor<Real> forward(const std::vector<std::int32_t>& ids, int batch, int seq,
                         ProbeSink<Real>* probes = nullptr) {
        Tensor<Real> x = embedding(embedding_, ids, batch, seq);
        if (spec_.scaled_input) {
            x = scale(x, static_cast<Real>(1.0 / cfg_.init_std));
        }
        for (int l = 0; l < cfg_.layers; ++l) {
            x = block_forward(l, x, probes);
        }
        if (spec_.n_final == NormKind::rmsnorm) {
            x = rmsnorm(x, final_gains_, static_cast<Real>(cfg_.rms_eps));
        }
        Tensor<Real> head = cfg_.tied_embeddings ? permute(embedding_, {1, 0}) : head_;
        return matmul(x, head, *ctx_, {RoleKind::output_head, "lm_head"});
    }

    Tensor<Real> block_forward(int layer, const Tensor<Real>& x, ProbeSink<Real>* probes = nullptr) {
        Block& b = blocks_.at(static_cast<std::size_t>(layer));
        const Real eps = static_cast<Real>(cfg_.rms_eps);

        Tensor<Real> attn_in = x;
        if (spec_.n_pre == NormKind::rmsnorm) {
            attn_in = rmsnorm(x, b.pre_attn_gains, eps);
        }
        Tensor<Real> attn = gqa_forward(layer, attn_in, probes);
        attn = apply_post_norm(attn, b.post_attn_gains, eps);
        Tensor<Real> mid = add(x, attn);

        Tensor<Real> ffn_in = mid;
        if (spec_.n_pre == NormKind::rmsnorm) {
            ffn_in = rmsnorm(mid, b.pre_ffn_gains, eps);
        }
        Tensor<Real> ffn = ffn_forward(layer, ffn_in, probes);
        ffn = apply_post_norm(ffn, b.post_ffn_gains, eps);
        Tensor<Real> out = add(mid, ffn);

        if (probes != nullptr) {
            probes->add(ProbeKind::block_output, layer, out.data().data(),
                        out.numel() / static_cast<std::size_t>(cfg_.hidden), cfg_.hidden);
        }
        return out;
    }

    Tensor<Real> gqa_forward(int layer, const Tensor<Real>& x, ProbeSink<Real>* probes = nullptr) {
        Block& b = blocks_.at(static_cast<std::size_t>(layer));
        const std::string p = "blocks." + std::to_string(layer) + ".attn.";
        const int batch = x.dim(0);
        const int seq = x.dim(1);
        const int dh = cfg_.head_dim();

        Tensor<Real> q2 = matmul(x, b.wq, *ctx_, {RoleKind::linear, p + "q"});
        Tensor<Real> k2 = matmul(x, b.wk, *ctx_, {RoleKind::linear, p + "k"});
        Tensor<Real> v2 = matmul(x, b.wv, *ctx_, {RoleKind::linear, p + "v"});

        if (probes != nullptr) {
            // Fused projection output, before the QK regularizer.
            const std::size_t rows = static_cast<std::size_t>(batch) * seq;
            RowBlock<Real> parts[3] = {{q2.data().data(), cfg_.heads * dh},
                                       {k2.data().data(), cfg_.qk_groups * dh},
                                       {v2.data().data(), cfg_.qk_groups * dh}};
            probes->add(ProbeKind::qkv, layer, parts, 3, rows);
        }

        Tensor<Real> q = permute(reshape(q2, {batch, seq, cfg_.heads, dh}), {0, 2, 1, 3});
        Tensor<Real> k = permute(reshape(k2, {batch, seq, cfg_.qk_groups, dh}), {0, 2, 1, 3});
        Tensor<Real> v = permute(reshape(v2, {batch, seq, cfg_.qk_groups, dh}), {0, 2, 1, 3});

        q = apply_qk_regularizer(q, b.qk_q_gains, b.qk_q_alpha);
        k = apply_qk_regularizer(k, b.qk_k_gains, b.qk_k_alpha);

        std::vector<int> positions(static_cast<std::size_t>(seq));
        for (int i = 0; i < seq; ++i) positions[static_cast<std::size_t>(i)] = i;
        const Real base = static_cast<Real>(cfg_.rope_base);
        q = rope(q, positions, base);
        k = rope(k, positions, base);

        const Real s = static_cast<Real>(cfg_.effective_scale(spec_));
        Tensor<Real> scores = attn_scores(q, k, s, *ctx_, p + "scores");
        Tensor<Real> probs = softmax_causal(scores, &fully_masked_rows_);
        Tensor<Real> ctxv = attn_value(probs, v, *ctx_, p + "pv");
        Tensor<Real> merged =
            reshape(permute(ctxv, {0, 2, 1, 3}), {batch, seq, cfg_.heads * dh});
        return matmul(merged, b.wo, *ctx_, {RoleKind::linear, p + "out"});
    }

    Tensor<Real> ffn_forward(int layer, const Tensor<Real>& x, ProbeSink<Real>* probes = nullptr) {
        Block& b = blocks_.at(static_cast<std::size_t>(layer));
        const std::string p = "blocks." + std::to_string(layer) + ".ffn.";
        const int inner = cfg_.ffn_inner(spec_);

        Tensor<Real> hidden;
        Real reapply = Real(0);  // smooth variant: factor restored after the down projection
        if (is_glu(spec_.activation)) {
            Tensor<Real> gate = matmul(x, b.ffn_gate, *ctx_, {RoleKind::linear, p + "gate"});
            Tensor<Real> value = matmul(x, b.ffn_up, *ctx_, {RoleKind::linear, p + "up"});
            Tensor<Real> gate_act = silu(gate);
            if (spec_.activation == ActKind::smooth_swiglu) {
                Real c = absmax(gate_act.data().data(), gate_act.numel());
                if (c == Real(0)) c = Real(1);
                hidden = mul(scale(gate_act, Real(1) / c), value);
                reapply = c;
            } else {
                hidden = mul(gate_act, value);
            }
        } else {
            Tensor<Real> pre = matmul(x, b.ffn_up, *ctx_, {RoleKind::linear, p + "up"});
            switch (spec_.activation) {
                case ActKind::gelu: hidden = gelu(pre); break;
                case ActKind::silu: hidden = silu(pre); break;
                case ActKind::xielu: hidden = xielu(pre, b.act_alpha_p, b.act_alpha_n); break;
                default:
                    throw std::logic_error("unsupported FFN activation");
            }
        }
        if (probes != nullptr) {
            probes->add(ProbeKind::ffn_second_input, layer, hidden.data().data(),
                        hidden.numel() / static_cast<std::size_t>(inner), inner);
        }
        Tensor<Real> down = matmul(hidden, b.ffn_down, *ctx_, {RoleKind::linear, p + "down"});
        if (reapply != Real(0)) {
            down = scale(down, reapply);
        }
        return down;
    }

    std::vector<ParamEntry<Real>>& params() { return params_; }
    const std::vector<ParamEntry<Real>>& params() const { return params_; }

    const ParamEntry<Real>& param(const std::string& name) const {
        for (const auto& e : params_) {
            if (e.name == name) return e;
        }
        throw std::out_of_range("no such parameter: " + name);
    }

    const ArchitectureSpec& spec() const { return spec_; }
    const ModelConfig& config() const { return cfg_; }
    GemmContext<Real>& gemm_ctx() { return *ctx_; }
    std::shared_ptr<GemmContext<Real>> gemm_ctx_ptr() const { return ctx_; }
    int fully_masked_rows() const { return fully_masked_rows_; }

    void zero_grads() {
        for (auto& e : params_) e.tensor.zero_grad();
    }

    static constexpr double tanh_alpha_init = 0.5;

private:
    struct Block {
        Tensor<Real> wq, wk, wv, wo;
        Tensor<Real> ffn_gate, ffn_up, ffn_down;
        Tensor<Real> act_alpha_p, act_alpha_n;
        Tensor<Real> pre_attn_gains, pre_ffn_gains;
        Tensor<Real> post_attn_gains, post_ffn_gains;
        Tensor<Real> qk_q_gains, qk_k_gains;
        Tensor<Real> qk_q_alpha, qk_k_alpha;
    };

    void register_param(std::string name, Tensor<Real>& t, bool trainable, bool decay,
                        std::string component) {
        t.set_requires_grad(trainable);
        params_.push_back({std::move(name), t, trainable, decay, std::move(component)});
    }

    Tensor<Real> apply_post_norm(const Tensor<Real>& t, const Tensor<Real>& gains, Real eps) {
        switch (spec_.n_post) {
            case NormKind::identity: return t;
            case NormKind::rmsnorm: return rmsnorm(t, gains, eps);
            case NormKind::layerscale: return layerscale(t, gains);
        }
        throw std::logic_error("unknown post-norm kind");
    }

    Tensor<Real> apply_qk_regularizer(const Tensor<Real>& t, const Tensor<Real>& gains,
                                      const Tensor<Real>& alpha) {
        const Real eps = static_cast<Real>(cfg_.rms_eps);
        switch (spec_.n_qk) {
            case QkRegKind::identity: return t;
            case QkRegKind::rmsnorm_frozen:
                // Unit gains; the frozen gain value lives in the softmax scale.
                return rmsnorm(t, Tensor<Real>(), eps);
            case QkRegKind::rmsnorm_trainable: return rmsnorm(t, gains, eps);
            case QkRegKind::tanh_alpha:
                if (spec_.qk_gains_trainable) {
                    return tanh_alpha(t, alpha);
                }
                return tanh_alpha_const(t, static_cast<Real>(tanh_alpha_init));
        }
        throw std::logic_error("unknown QK regularizer");
    }

    ArchitectureSpec spec_;
    ModelConfig cfg_;
    std::shared_ptr<GemmContext<Real>> ctx_;
    std::vector<Block> blocks_;
    Tensor<Real> embedding_, final_gains_, head_;
    std::vector<ParamEntry<Real>> params_;
    int fully_masked_rows_ = 0;
};

}  // namespace fp8lab
