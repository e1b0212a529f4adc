// SPDX-License-Identifier: Apache-2.0
//
// Autograd operations. Every matrix multiplication goes through a precision
// role: the policy decides whether the GEMM runs exactly (FP32), on
// BF16-rounded inputs, or through the scaled FP8 pipeline with delayed
// scaling. FP8 backward passes quantize the output gradient with the
// backward format (E5M2) and re-quantize the saved operands with the forward
// format (E4M3), each against its own history.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fp8lab/gemm.hpp"
#include "fp8lab/tensor.hpp"

namespace fp8lab {

struct GemmRole {
    RoleKind kind = RoleKind::linear;
    std::string name;
};

enum class ActKind { gelu, silu, swiglu, smooth_swiglu, xielu, tanh_alpha };

ActKind act_kind_by_name(const std::string& name);
const char* to_string(ActKind k);

namespace detail {

template <class Real>
struct Prepared {
    const Real* ptr = nullptr;
    Buffer<Real> owned;
    Real rho = Real(1);
    Real amax = Real(0);
    bool boot = false;
    ScalingHistory* hist = nullptr;

    // History update deferred until after the GEMM call.
    void finish() {
        if (hist != nullptr && !boot) {
            hist->push(static_cast<double>(amax));
        }
    }
};

template <class Real>
Prepared<Real> prepare_fp8(const Real* x, std::size_t n, ScalingHistory& hist, CastStats& stats) {
    Prepared<Real> p;
    p.amax = absmax(x, n);
    p.boot = hist.empty();
    if (p.boot) {
        hist.push(static_cast<double>(p.amax));  // bootstrap seeds the history
    }
    p.rho = static_cast<Real>(hist.scale());
    p.owned.resize(n);
    quantize_with_scale(x, p.owned.data(), n, hist.format(), p.rho, &stats);
    stats.absmax = static_cast<double>(p.amax);
    p.ptr = p.owned.data();
    p.hist = &hist;
    return p;
}

template <class Real>
Prepared<Real> prepare_bf16(const Real* x, std::size_t n) {
    Prepared<Real> p;
    p.owned.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        p.owned[i] = static_cast<Real>(bf16_round(x[i]));
    }
    p.ptr = p.owned.data();
    return p;
}

template <class Real>
Prepared<Real> prepare_exact(const Real* x) {
    Prepared<Real> p;
    p.ptr = x;
    return p;
}

template <class Real>
std::shared_ptr<TensorNode<Real>> make_node(std::vector<int> shape,
                                            std::vector<std::shared_ptr<TensorNode<Real>>> parents) {
    auto n = std::make_shared<TensorNode<Real>>();
    n->value.resize(shape_numel(shape));  // every op writes all outputs
    n->shape = std::move(shape);
    n->parents = std::move(parents);
    return n;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and structural ops

template <class Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument("add: shape mismatch");
    }
    auto node = detail::make_node<Real>(a.shape(), {a.node(), b.node()});
    const auto& av = a.data();
    const auto& bv = b.data();
    for (std::size_t i = 0; i < av.size(); ++i) node->value[i] = av[i] + bv[i];
    node->backward_fn = [](TensorNode<Real>& self) {
        for (auto& parent : self.parents) {
            parent->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) parent->grad[i] += self.grad[i];
        }
    };
    return Tensor<Real>(node);
}

template <class Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument("mul: shape mismatch");
    }
    auto node = detail::make_node<Real>(a.shape(), {a.node(), b.node()});
    const auto& av = a.data();
    const auto& bv = b.data();
    for (std::size_t i = 0; i < av.size(); ++i) node->value[i] = av[i] * bv[i];
    node->backward_fn = [](TensorNode<Real>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        pa.ensure_grad();
        pb.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            pa.grad[i] += self.grad[i] * pb.value[i];
            pb.grad[i] += self.grad[i] * pa.value[i];
        }
    };
    return Tensor<Real>(node);
}

template <class Real>
Tensor<Real> scale(const Tensor<Real>& a, Real c) {
    auto node = detail::make_node<Real>(a.shape(), {a.node()});
    const auto& av = a.data();
    for (std::size_t i = 0; i < av.size(); ++i) node->value[i] = av[i] * c;
    node->backward_fn = [c](TensorNode<Real>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * c;
    };
    return Tensor<Real>(node);
}

template <class Real>
Tensor<Real> reshape(const Tensor<Real>& a, std::vector<int> shape) {
    if (shape_numel(shape) != a.numel()) {
        throw std::invalid_argument("reshape: element count mismatch");
    }
    auto node = detail::make_node<Real>(std::move(shape), {a.node()});
    node->value = a.data();
    node->backward_fn = [](TensorNode<Real>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    };
    return Tensor<Real>(node);
}

namespace detail {
inline void permute_strides(const std::vector<int>& shape, std::vector<std::size_t>& strides) {
    strides.assign(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
        strides[static_cast<std::size_t>(i)] =
            strides[static_cast<std::size_t>(i) + 1] *
            static_cast<std::size_t>(shape[static_cast<std::size_t>(i) + 1]);
    }
}

// dst[j] = src[index permuted by perm]: dst shape = src shape permuted.
template <class Real, class Accum>
void permute_copy(const std::vector<int>& src_shape, const std::vector<int>& perm,
                  const Real* src, Accum&& store) {
    std::vector<std::size_t> src_strides;
    permute_strides(src_shape, src_strides);
    std::vector<int> dst_shape(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        dst_shape[i] = src_shape[static_cast<std::size_t>(perm[i])];
    }
    std::vector<int> idx(perm.size(), 0);
    const std::size_t total = shape_numel(dst_shape);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t src_off = 0;
        for (std::size_t d = 0; d < perm.size(); ++d) {
            src_off += static_cast<std::size_t>(idx[d]) *
                       src_strides[static_cast<std::size_t>(perm[d])];
        }
        store(flat, src[src_off]);
        for (int d = static_cast<int>(perm.size()) - 1; d >= 0; --d) {
            if (++idx[static_cast<std::size_t>(d)] < dst_shape[static_cast<std::size_t>(d)]) break;
            idx[static_cast<std::size_t>(d)] = 0;
        }
    }
}
}  // namespace detail

template <class Real>
Tensor<Real> permute(const Tensor<Real>& a, std::vector<int> perm) {
    if (perm.size() != a.shape().size()) {
        throw std::invalid_argument("permute: rank mismatch");
    }
    std::vector<int> out_shape(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        out_shape[i] = a.shape()[static_cast<std::size_t>(perm[i])];
    }
    auto node = detail::make_node<Real>(out_shape, {a.node()});
    auto* dst = node->value.data();
    detail::permute_copy(a.shape(), perm, a.data().data(),
                         [dst](std::size_t flat, Real v) { dst[flat] = v; });
    node->backward_fn = [perm, out_shape](TensorNode<Real>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        // Inverse permutation: route grad back to source offsets.
        std::vector<int> inv(perm.size());
        for (std::size_t i = 0; i < perm.size(); ++i) {
            inv[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
        }
        auto* g = self.grad.data();
        detail::permute_copy(out_shape, inv, g,
                             [&p](std::size_t flat, Real v) { p.grad[flat] += v; });
    };
    return Tensor<Real>(node);
}

template <class Real>
Tensor<Real> sum(const Tensor<Real>& a) {
    auto node = detail::make_node<Real>({1}, {a.node()});
    double acc = 0;
    for (Real v : a.data()) acc += static_cast<double>(v);
    node->value[0] = static_cast<Real>(acc);
    node->backward_fn = [](TensorNode<Real>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (auto& g : p.grad) g += self.grad[0];
    };
    return Tensor<Real>(node);
}

// ---------------------------------------------------------------------------
// Matrix multiplication with precision routing
//
// a: [..., K] (leading dims flattened to rows), b: [K, N] -> [..., N].
// Backward: dA = dY B^T, dB = A^T dY through the same precision path.

template <class Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b, GemmContext<Real>& ctx,
                    const GemmRole& role) {
    if (b.ndim() != 2) {
        throw std::invalid_argument("matmul: rhs must be 2-D");
    }
    const int k = a.dim(-1);
    if (k != b.dim(0)) {
        throw std::invalid_argument("matmul: inner dimensions do not match");
    }
    const int n = b.dim(1);
    const int m = static_cast<int>(a.numel()) / k;
    std::vector<int> out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(n);

    auto node = detail::make_node<Real>(std::move(out_shape), {a.node(), b.node()});
    const GemmPrecision path = ctx.policy().slot(role.kind);
    ctx.counters().record(role.kind, path);

    const Real* av = a.data().data();
    const Real* bv = b.data().data();
    if (path == GemmPrecision::fp32) {
        gemm(false, false, m, n, k, Real(1), av, k, bv, n, Real(0), node->value.data(), n);
    } else if (path == GemmPrecision::bf16) {
        auto pa = detail::prepare_bf16(av, a.numel());
        auto pb = detail::prepare_bf16(bv, b.numel());
        gemm(false, false, m, n, k, Real(1), pa.ptr, k, pb.ptr, n, Real(0), node->value.data(), n);
    } else {
        auto& rs = ctx.role_state(role.name);
        auto& stats = ctx.cast_stats();
        auto pa = detail::prepare_fp8(av, a.numel(), rs.lhs_fwd, stats.at(role.name + ":lhs_fwd"));
        auto pb = detail::prepare_fp8(bv, b.numel(), rs.rhs_fwd, stats.at(role.name + ":rhs_fwd"));
        gemm(false, false, m, n, k, Real(1), pa.ptr, k, pb.ptr, n, Real(0), node->value.data(), n);
        const Real denom = pa.rho * pb.rho;
        for (auto& v : node->value) v /= denom;
        pa.finish();
        pb.finish();
    }

    GemmContext<Real>* ctx_ptr = &ctx;
    GemmRole role_copy = role;
    node->backward_fn = [ctx_ptr, role_copy, m, n, k](TensorNode<Real>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        pa.ensure_grad();
        pb.ensure_grad();
        const Real* dy = self.grad.data();
        const GemmPrecision path = ctx_ptr->policy().slot(role_copy.kind);
        if (path == GemmPrecision::fp32) {
            ctx_ptr->counters().record(role_copy.kind, path);
            ctx_ptr->counters().record(role_copy.kind, path);
            gemm(false, true, m, k, n, Real(1), dy, n, pb.value.data(), n, Real(1),
                 pa.grad.data(), k);
            gemm(true, false, k, n, m, Real(1), pa.value.data(), k, dy, n, Real(1),
                 pb.grad.data(), n);
        } else if (path == GemmPrecision::bf16) {
            ctx_ptr->counters().record(role_copy.kind, path);
            ctx_ptr->counters().record(role_copy.kind, path);
            auto qdy = detail::prepare_bf16(dy, self.grad.size());
            auto qa = detail::prepare_bf16(pa.value.data(), pa.value.size());
            auto qb = detail::prepare_bf16(pb.value.data(), pb.value.size());
            gemm(false, true, m, k, n, Real(1), qdy.ptr, n, qb.ptr, n, Real(1), pa.grad.data(), k);
            gemm(true, false, k, n, m, Real(1), qa.ptr, k, qdy.ptr, n, Real(1), pb.grad.data(), n);
        } else {
            ctx_ptr->counters().record(role_copy.kind, path);
            ctx_ptr->counters().record(role_copy.kind, path);
            auto& rs = ctx_ptr->role_state(role_copy.name);
            auto& stats = ctx_ptr->cast_stats();
            auto qdy = detail::prepare_fp8(dy, self.grad.size(), rs.grad_out,
                                           stats.at(role_copy.name + ":grad_out"));
            auto qa = detail::prepare_fp8(pa.value.data(), pa.value.size(), rs.lhs_bwd,
                                          stats.at(role_copy.name + ":lhs_bwd"));
            auto qb = detail::prepare_fp8(pb.value.data(), pb.value.size(), rs.rhs_bwd,
                                          stats.at(role_copy.name + ":rhs_bwd"));
            Buffer<Real> tmp_a(pa.value.size());
            Buffer<Real> tmp_b(pb.value.size());
            gemm(false, true, m, k, n, Real(1), qdy.ptr, n, qb.ptr, n, Real(0), tmp_a.data(), k);
            gemm(true, false, k, n, m, Real(1), qa.ptr, k, qdy.ptr, n, Real(0), tmp_b.data(), n);
            const Real denom_a = qdy.rho * qb.rho;
            const Real denom_b = qa.rho * qdy.rho;
            for (std::size_t i = 0; i < tmp_a.size(); ++i) pa.grad[i] += tmp_a[i] / denom_a;
            for (std::size_t i = 0; i < tmp_b.size(); ++i) pb.grad[i] += tmp_b[i] / denom_b;
            qdy.finish();
            qa.finish();
            qb.finish();
        }
    };
    return Tensor<Real>(node);
}

// ---------------------------------------------------------------------------
// Grouped attention GEMMs. Query heads are grouped onto shared K/V heads;
// quantization is tensorwise (one scale per operand tensor, not per slice).

namespace detail {
template <class Real>
struct AttnDims {
    int batch, heads, kv_heads, rows, cols, head_dim, group;
};

template <class Real>
AttnDims<Real> attn_dims(const Tensor<Real>& q4, const Tensor<Real>& kv4, int q_last,
                         const char* what) {
    if (q4.ndim() != 4 || kv4.ndim() != 4) {
        throw std::invalid_argument(std::string(what) + ": operands must be 4-D");
    }
    AttnDims<Real> d{};
    d.batch = q4.dim(0);
    d.heads = q4.dim(1);
    d.rows = q4.dim(2);
    d.kv_heads = kv4.dim(1);
    if (kv4.dim(0) != d.batch || d.heads % d.kv_heads != 0) {
        throw std::invalid_argument(std::string(what) + ": head grouping mismatch");
    }
    d.group = d.heads / d.kv_heads;
    d.cols = kv4.dim(2);
    d.head_dim = q_last;
    return d;
}
}  // namespace detail

// scores[n,h] = scale * q[n,h] k[n, h/group]^T;  q: (N,H,C,dh), k: (N,G,C,dh).
template <class Real>
Tensor<Real> attn_scores(const Tensor<Real>& q, const Tensor<Real>& k, Real score_scale,
                         GemmContext<Real>& ctx, const std::string& role_name) {
    auto d = detail::attn_dims(q, k, q.dim(3), "attn_scores");
    if (k.dim(3) != d.head_dim) {
        throw std::invalid_argument("attn_scores: head dimension mismatch");
    }
    auto node = detail::make_node<Real>({d.batch, d.heads, d.rows, d.cols}, {q.node(), k.node()});
    const GemmPrecision path = ctx.policy().slot(RoleKind::attention_scores);
    ctx.counters().record(RoleKind::attention_scores, path);

    const std::size_t q_head = static_cast<std::size_t>(d.rows) * d.head_dim;
    const std::size_t k_head = static_cast<std::size_t>(d.cols) * d.head_dim;
    const std::size_t s_head = static_cast<std::size_t>(d.rows) * d.cols;

    detail::Prepared<Real> pq, pk;
    if (path == GemmPrecision::fp32) {
        pq = detail::prepare_exact(q.data().data());
        pk = detail::prepare_exact(k.data().data());
    } else if (path == GemmPrecision::bf16) {
        pq = detail::prepare_bf16(q.data().data(), q.numel());
        pk = detail::prepare_bf16(k.data().data(), k.numel());
    } else {
        auto& rs = ctx.role_state(role_name);
        auto& stats = ctx.cast_stats();
        pq = detail::prepare_fp8(q.data().data(), q.numel(), rs.lhs_fwd,
                                 stats.at(role_name + ":lhs_fwd"));
        pk = detail::prepare_fp8(k.data().data(), k.numel(), rs.rhs_fwd,
                                 stats.at(role_name + ":rhs_fwd"));
    }
    const Real alpha = path == GemmPrecision::fp8 ? Real(1) : score_scale;
    for (int b = 0; b < d.batch; ++b) {
        for (int h = 0; h < d.heads; ++h) {
            const int g = h / d.group;
            const Real* qs = pq.ptr + (static_cast<std::size_t>(b) * d.heads + h) * q_head;
            const Real* ks = pk.ptr + (static_cast<std::size_t>(b) * d.kv_heads + g) * k_head;
            Real* os = node->value.data() + (static_cast<std::size_t>(b) * d.heads + h) * s_head;
            gemm(false, true, d.rows, d.cols, d.head_dim, alpha, qs, d.head_dim, ks, d.head_dim,
                 Real(0), os, d.cols);
        }
    }
    if (path == GemmPrecision::fp8) {
        const Real denom = pq.rho * pk.rho;
        for (auto& v : node->value) v = v / denom * score_scale;
    }
    pq.finish();
    pk.finish();

    GemmContext<Real>* ctx_ptr = &ctx;
    node->backward_fn = [ctx_ptr, role_name, d, score_scale, q_head, k_head,
                         s_head](TensorNode<Real>& self) {
        auto& nq = *self.parents[0];
        auto& nk = *self.parents[1];
        nq.ensure_grad();
        nk.ensure_grad();
        const GemmPrecision path = ctx_ptr->policy().slot(RoleKind::attention_scores);
        ctx_ptr->counters().record(RoleKind::attention_scores, path);
        ctx_ptr->counters().record(RoleKind::attention_scores, path);

        detail::Prepared<Real> pds, pq, pk;
        if (path == GemmPrecision::fp32) {
            pds = detail::prepare_exact(self.grad.data());
            pq = detail::prepare_exact(nq.value.data());
            pk = detail::prepare_exact(nk.value.data());
        } else if (path == GemmPrecision::bf16) {
            pds = detail::prepare_bf16(self.grad.data(), self.grad.size());
            pq = detail::prepare_bf16(nq.value.data(), nq.value.size());
            pk = detail::prepare_bf16(nk.value.data(), nk.value.size());
        } else {
            auto& rs = ctx_ptr->role_state(role_name);
            auto& stats = ctx_ptr->cast_stats();
            pds = detail::prepare_fp8(self.grad.data(), self.grad.size(), rs.grad_out,
                                      stats.at(role_name + ":grad_out"));
            pq = detail::prepare_fp8(nq.value.data(), nq.value.size(), rs.lhs_bwd,
                                     stats.at(role_name + ":lhs_bwd"));
            pk = detail::prepare_fp8(nk.value.data(), nk.value.size(), rs.rhs_bwd,
                                     stats.at(role_name + ":rhs_bwd"));
        }
        const bool quantized = path == GemmPrecision::fp8;
        const Real alpha = quantized ? Real(1) : score_scale;
        Buffer<Real> tq, tk;
        Real* dq_dst = nq.grad.data();
        Real* dk_dst = nk.grad.data();
        if (quantized) {
            tq.assign(nq.value.size(), Real(0));
            tk.assign(nk.value.size(), Real(0));
            dq_dst = tq.data();
            dk_dst = tk.data();
        }
        for (int b = 0; b < d.batch; ++b) {
            for (int h = 0; h < d.heads; ++h) {
                const int g = h / d.group;
                const std::size_t qo = (static_cast<std::size_t>(b) * d.heads + h) * q_head;
                const std::size_t ko = (static_cast<std::size_t>(b) * d.kv_heads + g) * k_head;
                const std::size_t so = (static_cast<std::size_t>(b) * d.heads + h) * s_head;
                gemm(false, false, d.rows, d.head_dim, d.cols, alpha, pds.ptr + so, d.cols,
                     pk.ptr + ko, d.head_dim, Real(1), dq_dst + qo, d.head_dim);
                gemm(true, false, d.cols, d.head_dim, d.rows, alpha, pds.ptr + so, d.cols,
                     pq.ptr + qo, d.head_dim, Real(1), dk_dst + ko, d.head_dim);
            }
        }
        if (quantized) {
            const Real denom_q = pds.rho * pk.rho;
            const Real denom_k = pds.rho * pq.rho;
            for (std::size_t i = 0; i < tq.size(); ++i) {
                nq.grad[i] += tq[i] / denom_q * score_scale;
            }
            for (std::size_t i = 0; i < tk.size(); ++i) {
                nk.grad[i] += tk[i] / denom_k * score_scale;
            }
        }
        pds.finish();
        pq.finish();
        pk.finish();
    };
    return Tensor<Real>(node);
}

// out[n,h] = p[n,h] v[n, h/group];  p: (N,H,C,C), v: (N,G,C,dh) -> (N,H,C,dh).
template <class Real>
Tensor<Real> attn_value(const Tensor<Real>& p, const Tensor<Real>& v, GemmContext<Real>& ctx,
                        const std::string& role_name) {
    auto d = detail::attn_dims(p, v, v.dim(3), "attn_value");
    if (p.dim(3) != d.cols) {
        throw std::invalid_argument("attn_value: probability/value length mismatch");
    }
    auto node = detail::make_node<Real>({d.batch, d.heads, d.rows, d.head_dim},
                                        {p.node(), v.node()});
    const GemmPrecision path = ctx.policy().slot(RoleKind::attention_value);
    ctx.counters().record(RoleKind::attention_value, path);

    const std::size_t p_head = static_cast<std::size_t>(d.rows) * d.cols;
    const std::size_t v_head = static_cast<std::size_t>(d.cols) * d.head_dim;
    const std::size_t o_head = static_cast<std::size_t>(d.rows) * d.head_dim;

    detail::Prepared<Real> pp, pv;
    if (path == GemmPrecision::fp32) {
        pp = detail::prepare_exact(p.data().data());
        pv = detail::prepare_exact(v.data().data());
    } else if (path == GemmPrecision::bf16) {
        pp = detail::prepare_bf16(p.data().data(), p.numel());
        pv = detail::prepare_bf16(v.data().data(), v.numel());
    } else {
        auto& rs = ctx.role_state(role_name);
        auto& stats = ctx.cast_stats();
        pp = detail::prepare_fp8(p.data().data(), p.numel(), rs.lhs_fwd,
                                 stats.at(role_name + ":lhs_fwd"));
        pv = detail::prepare_fp8(v.data().data(), v.numel(), rs.rhs_fwd,
                                 stats.at(role_name + ":rhs_fwd"));
    }
    for (int b = 0; b < d.batch; ++b) {
        for (int h = 0; h < d.heads; ++h) {
            const int g = h / d.group;
            const Real* ps = pp.ptr + (static_cast<std::size_t>(b) * d.heads + h) * p_head;
            const Real* vs = pv.ptr + (static_cast<std::size_t>(b) * d.kv_heads + g) * v_head;
            Real* os = node->value.data() + (static_cast<std::size_t>(b) * d.heads + h) * o_head;
            gemm(false, false, d.rows, d.head_dim, d.cols, Real(1), ps, d.cols, vs, d.head_dim,
                 Real(0), os, d.head_dim);
        }
    }
    if (path == GemmPrecision::fp8) {
        const Real denom = pp.rho * pv.rho;
        for (auto& x : node->value) x /= denom;
    }
    pp.finish();
    pv.finish();

    GemmContext<Real>* ctx_ptr = &ctx;
    node->backward_fn = [ctx_ptr, role_name, d, p_head, v_head, o_head](TensorNode<Real>& self) {
        auto& np = *self.parents[0];
        auto& nv = *self.parents[1];
        np.ensure_grad();
        nv.ensure_grad();
        const GemmPrecision path = ctx_ptr->policy().slot(RoleKind::attention_value);
        ctx_ptr->counters().record(RoleKind::attention_value, path);
        ctx_ptr->counters().record(RoleKind::attention_value, path);

        detail::Prepared<Real> pdo, pp, pv;
        if (path == GemmPrecision::fp32) {
            pdo = detail::prepare_exact(self.grad.data());
            pp = detail::prepare_exact(np.value.data());
            pv = detail::prepare_exact(nv.value.data());
        } else if (path == GemmPrecision::bf16) {
            pdo = detail::prepare_bf16(self.grad.data(), self.grad.size());
            pp = detail::prepare_bf16(np.value.data(), np.value.size());
            pv = detail::prepare_bf16(nv.value.data(), nv.value.size());
        } else {
            auto& rs = ctx_ptr->role_state(role_name);
            auto& stats = ctx_ptr->cast_stats();
            pdo = detail::prepare_fp8(self.grad.data(), self.grad.size(), rs.grad_out,
                                      stats.at(role_name + ":grad_out"));
            pp = detail::prepare_fp8(np.value.data(), np.value.size(), rs.lhs_bwd,
                                     stats.at(role_name + ":lhs_bwd"));
            pv = detail::prepare_fp8(nv.value.data(), nv.value.size(), rs.rhs_bwd,
                                     stats.at(role_name + ":rhs_bwd"));
        }
        const bool quantized = path == GemmPrecision::fp8;
        Buffer<Real> tp, tv;
        Real* dp_dst = np.grad.data();
        Real* dv_dst = nv.grad.data();
        if (quantized) {
            tp.assign(np.value.size(), Real(0));
            tv.assign(nv.value.size(), Real(0));
            dp_dst = tp.data();
            dv_dst = tv.data();
        }
        for (int b = 0; b < d.batch; ++b) {
            for (int h = 0; h < d.heads; ++h) {
                const int g = h / d.group;
                const std::size_t po = (static_cast<std::size_t>(b) * d.heads + h) * p_head;
                const std::size_t vo = (static_cast<std::size_t>(b) * d.kv_heads + g) * v_head;
                const std::size_t oo = (static_cast<std::size_t>(b) * d.heads + h) * o_head;
                gemm(false, true, d.rows, d.cols, d.head_dim, Real(1), pdo.ptr + oo, d.head_dim,
                     pv.ptr + vo, d.head_dim, Real(1), dp_dst + po, d.cols);
                gemm(true, false, d.cols, d.head_dim, d.rows, Real(1), pp.ptr + po, d.cols,
                     pdo.ptr + oo, d.head_dim, Real(1), dv_dst + vo, d.head_dim);
            }
        }
        if (quantized) {
            const Real denom_p = pdo.rho * pv.rho;
            const Real denom_v = pp.rho * pdo.rho;
            for (std::size_t i = 0; i < tp.size(); ++i) np.grad[i] += tp[i] / denom_p;
            for (std::size_t i = 0; i < tv.size(); ++i) nv.grad[i] += tv[i] / denom_v;
        }
        pdo.finish();
        pp.finish();
        pv.finish();
    };
    return Tensor<Real>(node);
}

// ---------------------------------------------------------------------------
// Normalization

// y = gains .* x / sqrt(mean(x^2) + eps) over the last dimension. An
// undefined gains tensor means unit gains with no trainable parameter.
template <class Real>
Tensor<Real> rmsnorm(const Tensor<Real>& x, const Tensor<Real>& gains, Real eps) {
    const int dim = x.dim(-1);
    const std::size_t rows = x.numel() / static_cast<std::size_t>(dim);
    const bool with_gains = gains.defined();
    if (with_gains && (gains.ndim() != 1 || gains.dim(0) != dim)) {
        throw std::invalid_argument("rmsnorm: gains length must match the last dimension");
    }
    std::vector<std::shared_ptr<TensorNode<Real>>> parents{x.node()};
    if (with_gains) parents.push_back(gains.node());
    auto node = detail::make_node<Real>(x.shape(), std::move(parents));

    std::vector<Real> inv_rms(rows);
    const Real* xv = x.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        double ss = 0;
        const Real* row = xv + r * static_cast<std::size_t>(dim);
        for (int i = 0; i < dim; ++i) ss += static_cast<double>(row[i]) * row[i];
        inv_rms[r] = static_cast<Real>(1.0 / std::sqrt(ss / dim + static_cast<double>(eps)));
        Real* out = node->value.data() + r * static_cast<std::size_t>(dim);
        for (int i = 0; i < dim; ++i) {
            const Real g = with_gains ? gains.data()[static_cast<std::size_t>(i)] : Real(1);
            out[i] = g * row[i] * inv_rms[r];
        }
    }
    node->backward_fn = [dim, rows, with_gains, inv_rms = std::move(inv_rms)](
                            TensorNode<Real>& self) {
        auto& nx = *self.parents[0];
        nx.ensure_grad();
        TensorNode<Real>* ng = with_gains ? self.parents[1].get() : nullptr;
        if (ng != nullptr) ng->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t off = r * static_cast<std::size_t>(dim);
            const Real* xr = nx.value.data() + off;
            const Real* gr = self.grad.data() + off;
            const Real inv = inv_rms[r];
            double dot = 0;  // sum_i g_i gamma_i x_i
            for (int i = 0; i < dim; ++i) {
                const Real gamma = ng ? ng->value[static_cast<std::size_t>(i)] : Real(1);
                dot += static_cast<double>(gr[i]) * gamma * xr[i];
            }
            const Real corr = static_cast<Real>(dot / dim) * inv * inv * inv;
            for (int i = 0; i < dim; ++i) {
                const Real gamma = ng ? ng->value[static_cast<std::size_t>(i)] : Real(1);
                nx.grad[off + static_cast<std::size_t>(i)] += gamma * gr[i] * inv - corr * xr[i];
                if (ng != nullptr) {
                    ng->grad[static_cast<std::size_t>(i)] += gr[i] * xr[i] * inv;
                }
            }
        }
    };
    return Tensor<Real>(node);
}

// y = gains .* x per channel over the last dimension.
template <class Real>
Tensor<Real> layerscale(const Tensor<Real>& x, const Tensor<Real>& gains) {
    const int dim = x.dim(-1);
    if (gains.ndim() != 1 || gains.dim(0) != dim) {
        throw std::invalid_argument("layerscale: gains length must match the last dimension");
    }
    auto node = detail::make_node<Real>(x.shape(), {x.node(), gains.node()});
    const std::size_t rows = x.numel() / static_cast<std::size_t>(dim);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t off = r * static_cast<std::size_t>(dim);
        for (int i = 0; i < dim; ++i) {
            node->value[off + static_cast<std::size_t>(i)] =
                x.data()[off + static_cast<std::size_t>(i)] *
                gains.data()[static_cast<std::size_t>(i)];
        }
    }
    node->backward_fn = [dim, rows](TensorNode<Real>& self) {
        auto& nx = *self.parents[0];
        auto& ng = *self.parents[1];
        nx.ensure_grad();
        ng.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t off = r * static_cast<std::size_t>(dim);
            for (int i = 0; i < dim; ++i) {
                const std::size_t j = off + static_cast<std::size_t>(i);
                nx.grad[j] += self.grad[j] * ng.value[static_cast<std::size_t>(i)];
                ng.grad[static_cast<std::size_t>(i)] += self.grad[j] * nx.value[j];
            }
        }
    };
    return Tensor<Real>(node);
}

// ---------------------------------------------------------------------------
// Activations

template <class Real>
Tensor<Real> gelu(const Tensor<Real>& x) {
    auto node = detail::make_node<Real>(x.shape(), {x.node()});
    const Real inv_sqrt2 = static_cast<Real>(0.7071067811865475244);
    std::vector<Real> cdf(x.numel());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const Real v = x.data()[i];
        cdf[i] = Real(0.5) * (Real(1) + std::erf(v * inv_sqrt2));
        node->value[i] = v * cdf[i];
    }
    node->backward_fn = [cdf = std::move(cdf)](TensorNode<Real>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        const Real inv_sqrt2pi = static_cast<Real>(0.3989422804014326779);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const Real v = p.value[i];
            const Real pdf = inv_sqrt2pi * std::exp(Real(-0.5) * v * v);
            p.grad[i] += self.grad[i] * (cdf[i] + v * pdf);
        }
    };
    return Tensor<Real>(node);
}

template <class Real>
Tensor<Real> silu(const Tensor<Real>& x) {
    auto node = detail::make_node<Real>(x.shape(), {x.node()});
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const Real v = x.data()[i];
        node->value[i] = v / (Real(1) + std::exp(-v));
    }
    node->backward_fn = [](TensorNode<Real>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const Real v = p.value[i];
            const Real sig = Real(1) / (Real(1) + std::exp(-v));
            p.grad[i] += self.grad[i] * sig * (Real(1) + v * (Real(1) - sig));
        }
    };
    return Tensor<Real>(node);
}

// y = tanh(alpha x) with trainable scalar alpha.
template <class Real>
Tensor<Real> tanh_alpha(const Tensor<Real>& x, const Tensor<Real>& alpha) {
    if (alpha.numel() != 1) {
        throw std::invalid_argument("tanh_alpha: alpha must be a scalar tensor");
    }
    auto node = detail::make_node<Real>(x.shape(), {x.node(), alpha.node()});
    const Real a = alpha.data()[0];
    for (std::size_t i = 0; i < x.numel(); ++i) {
        node->value[i] = std::tanh(a * x.data()[i]);
    }
    node->backward_fn = [](TensorNode<Real>& self) {
        auto& nx = *self.parents[0];
        auto& na = *self.parents[1];
        nx.ensure_grad();
        na.ensure_grad();
        const Real a = na.value[0];
        double da = 0;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const Real y = self.value[i];
            const Real sech2 = Real(1) - y * y;
            nx.grad[i] += self.grad[i] * a * sech2;
            da += static_cast<double>(self.grad[i]) * sech2 * nx.value[i];
        }
        na.grad[0] += static_cast<Real>(da);
    };
    return Tensor<Real>(node);
}

// Frozen variant: alpha is a plain constant, no parameter registered.
template <class Real>
Tensor<Real> tanh_alpha_const(const Tensor<Real>& x, Real alpha) {
    auto node = detail::make_node<Real>(x.shape(), {x.node()});
    for (std::size_t i = 0; i < x.numel(); ++i) {
        node->value[i] = std::tanh(alpha * x.data()[i]);
    }
    node->backward_fn = [alpha](TensorNode<Real>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const Real y = self.value[i];
            p.grad[i] += self.grad[i] * alpha * (Real(1) - y * y);
        }
    };
    return Tensor<Real>(node);
}

// Trainable activation with a quadratic positive branch:
//   x >= 0: softplus(p) x^2 + x/2
//   x <  0: n (e^x - 1 - x) + x/2
template <class Real>
Tensor<Real> xielu(const Tensor<Real>& x, const Tensor<Real>& alpha_p_raw,
                   const Tensor<Real>& alpha_n) {
    if (alpha_p_raw.numel() != 1 || alpha_n.numel() != 1) {
        throw std::invalid_argument("xielu: alpha parameters must be scalar tensors");
    }
    auto node =
        detail::make_node<Real>(x.shape(), {x.node(), alpha_p_raw.node(), alpha_n.node()});
    const Real p_raw = alpha_p_raw.data()[0];
    const Real ap = static_cast<Real>(std::log1p(std::exp(static_cast<double>(p_raw))));
    const Real an = alpha_n.data()[0];
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const Real v = x.data()[i];
        if (v >= Real(0)) {
            node->value[i] = ap * v * v + v / Real(2);
        } else {
            node->value[i] = an * (std::exp(v) - Real(1) - v) + v / Real(2);
        }
    }
    node->backward_fn = [](TensorNode<Real>& self) {
        auto& nx = *self.parents[0];
        auto& np = *self.parents[1];
        auto& nn = *self.parents[2];
        nx.ensure_grad();
        np.ensure_grad();
        nn.ensure_grad();
        const Real p_raw = np.value[0];
        const Real ap = static_cast<Real>(std::log1p(std::exp(static_cast<double>(p_raw))));
        const Real sig_p = Real(1) / (Real(1) + std::exp(-p_raw));  // d softplus / d raw
        const Real an = nn.value[0];
        double dap = 0, dan = 0;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const Real v = nx.value[i];
            const Real g = self.grad[i];
            if (v >= Real(0)) {
                nx.grad[i] += g * (Real(2) * ap * v + Real(0.5));
                dap += static_cast<double>(g) * v * v;
            } else {
                const Real ex = std::exp(v);
                nx.grad[i] += g * (an * (ex - Real(1)) + Real(0.5));
                dan += static_cast<double>(g) * (ex - Real(1) - v);
            }
        }
        np.grad[0] += static_cast<Real>(dap) * sig_p;
        nn.grad[0] += static_cast<Real>(dan);
    };
    return Tensor<Real>(node);
}

// SwiGLU core: silu(gate) .* value. The smooth variant is assembled around
// the down projection by the caller.
template <class Real>
Tensor<Real> swiglu(const Tensor<Real>& gate, const Tensor<Real>& value) {
    return mul(silu(gate), value);
}

// ---------------------------------------------------------------------------
// Rotary position embeddings on (N, H, C, dh): adjacent pairs rotated by
// angle pos * base^(-2i/dh).
template <class Real>
Tensor<Real> rope(const Tensor<Real>& x, const std::vector<int>& positions, Real base) {
    if (x.ndim() != 4) {
        throw std::invalid_argument("rope: expected a (batch, heads, seq, dim) tensor");
    }
    const int dh = x.dim(3);
    if (dh % 2 != 0) {
        throw std::invalid_argument("rope: head dimension must be even");
    }
    const int seq = x.dim(2);
    if (static_cast<int>(positions.size()) != seq) {
        throw std::invalid_argument("rope: positions length must match the sequence length");
    }
    const int half = dh / 2;
    std::vector<Real> cos_t(static_cast<std::size_t>(seq) * half);
    std::vector<Real> sin_t(static_cast<std::size_t>(seq) * half);
    for (int c = 0; c < seq; ++c) {
        for (int i = 0; i < half; ++i) {
            const double freq =
                std::pow(static_cast<double>(base), -2.0 * i / static_cast<double>(dh));
            const double angle = positions[static_cast<std::size_t>(c)] * freq;
            cos_t[static_cast<std::size_t>(c) * half + i] = static_cast<Real>(std::cos(angle));
            sin_t[static_cast<std::size_t>(c) * half + i] = static_cast<Real>(std::sin(angle));
        }
    }
    auto node = detail::make_node<Real>(x.shape(), {x.node()});
    const int batch_heads = x.dim(0) * x.dim(1);
    auto apply = [seq, half, dh, batch_heads](const Real* src, Real* dst, const Real* cs,
                                              const Real* sn, bool inverse) {
        for (int bh = 0; bh < batch_heads; ++bh) {
            for (int c = 0; c < seq; ++c) {
                const std::size_t off =
                    (static_cast<std::size_t>(bh) * seq + c) * static_cast<std::size_t>(dh);
                for (int i = 0; i < half; ++i) {
                    const Real cv = cs[static_cast<std::size_t>(c) * half + i];
                    const Real sv_raw = sn[static_cast<std::size_t>(c) * half + i];
                    const Real sv = inverse ? -sv_raw : sv_raw;
                    const Real a = src[off + 2 * static_cast<std::size_t>(i)];
                    const Real b = src[off + 2 * static_cast<std::size_t>(i) + 1];
                    dst[off + 2 * static_cast<std::size_t>(i)] = a * cv - b * sv;
                    dst[off + 2 * static_cast<std::size_t>(i) + 1] = a * sv + b * cv;
                }
            }
        }
    };
    apply(x.data().data(), node->value.data(), cos_t.data(), sin_t.data(), false);
    node->backward_fn = [apply, cos_t = std::move(cos_t), sin_t = std::move(sin_t)](
                            TensorNode<Real>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        Buffer<Real> tmp(self.grad.size());
        apply(self.grad.data(), tmp.data(), cos_t.data(), sin_t.data(), true);
        for (std::size_t i = 0; i < tmp.size(); ++i) p.grad[i] += tmp[i];
    };
    return Tensor<Real>(node);
}

// ---------------------------------------------------------------------------
// Softmax over the last dimension with -inf masking semantics. A fully
// masked row produces zeros and bumps the flag counter.

namespace detail {
template <class Real>
void softmax_row(const Real* in, Real* out, int n, const Real* mask, int row_in_block,
                 bool causal, int* flagged) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        if (causal && i > row_in_block) continue;
        const double m = mask != nullptr ? static_cast<double>(mask[i]) : 0.0;
        if (std::isinf(m) && m < 0) continue;
        mx = std::max(mx, static_cast<double>(in[i]) + m);
    }
    if (std::isinf(mx)) {  // every entry masked
        for (int i = 0; i < n; ++i) out[i] = Real(0);
        if (flagged != nullptr) ++(*flagged);
        return;
    }
    const Real shift = static_cast<Real>(mx);
    double z = 0;
    for (int i = 0; i < n; ++i) {
        const bool excluded =
            (causal && i > row_in_block) ||
            (mask != nullptr && std::isinf(static_cast<double>(mask[i])) && mask[i] < Real(0));
        if (excluded) {
            out[i] = Real(0);
            continue;
        }
        const Real m = mask != nullptr ? mask[i] : Real(0);
        const Real e = std::exp(in[i] + m - shift);
        out[i] = e;
        z += static_cast<double>(e);
    }
    const Real inv = static_cast<Real>(1.0 / z);
    for (int i = 0; i < n; ++i) out[i] *= inv;
}

template <class Real>
std::function<void(TensorNode<Real>&)> softmax_backward(int n, std::size_t rows) {
    return [n, rows](TensorNode<Real>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t off = r * static_cast<std::size_t>(n);
            const Real* pr = self.value.data() + off;
            const Real* gr = self.grad.data() + off;
            double dot = 0;
            for (int i = 0; i < n; ++i) dot += static_cast<double>(gr[i]) * pr[i];
            for (int i = 0; i < n; ++i) {
                p.grad[off + static_cast<std::size_t>(i)] +=
                    pr[i] * (gr[i] - static_cast<Real>(dot));
            }
        }
    };
}
}  // namespace detail

// Generic row softmax; `additive_mask` has the size of the last dimension (one
// mask per row position) or the full tensor size, with -inf excluding entries.
template <class Real>
Tensor<Real> softmax_rows(const Tensor<Real>& x, const std::vector<Real>* additive_mask = nullptr,
                          int* fully_masked_rows = nullptr) {
    const int n = x.dim(-1);
    const std::size_t rows = x.numel() / static_cast<std::size_t>(n);
    if (additive_mask != nullptr && additive_mask->size() != static_cast<std::size_t>(n) &&
        additive_mask->size() != x.numel()) {
        throw std::invalid_argument("softmax_rows: mask is not broadcastable");
    }
    auto node = detail::make_node<Real>(x.shape(), {x.node()});
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t off = r * static_cast<std::size_t>(n);
        const Real* mask = nullptr;
        if (additive_mask != nullptr) {
            mask = additive_mask->size() == x.numel() ? additive_mask->data() + off
                                                      : additive_mask->data();
        }
        detail::softmax_row(x.data().data() + off, node->value.data() + off, n, mask, 0, false,
                            fully_masked_rows);
    }
    node->backward_fn = detail::softmax_backward<Real>(n, rows);
    return Tensor<Real>(node);
}

// Causal softmax over (N, H, C, C) attention scores.
template <class Real>
Tensor<Real> softmax_causal(const Tensor<Real>& scores, int* fully_masked_rows = nullptr) {
    if (scores.ndim() != 4 || scores.dim(2) != scores.dim(3)) {
        throw std::invalid_argument("softmax_causal: expected square (.., C, C) scores");
    }
    const int n = scores.dim(3);
    const std::size_t rows = scores.numel() / static_cast<std::size_t>(n);
    auto node = detail::make_node<Real>(scores.shape(), {scores.node()});
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t off = r * static_cast<std::size_t>(n);
        const int row_in_block = static_cast<int>(r % static_cast<std::size_t>(n));
        detail::softmax_row<Real>(scores.data().data() + off, node->value.data() + off, n, nullptr,
                                  row_in_block, true, fully_masked_rows);
    }
    node->backward_fn = detail::softmax_backward<Real>(n, rows);
    return Tensor<Real>(node);
}

// ---------------------------------------------------------------------------
// Mean negative log-likelihood over rows of (rows, vocab) logits.
template <class Real>
Tensor<Real> cross_entropy(const Tensor<Real>& logits, const std::vector<std::int32_t>& targets) {
    if (logits.ndim() != 2) {
        throw std::invalid_argument("cross_entropy: logits must be 2-D");
    }
    const int vocab = logits.dim(1);
    const std::size_t rows = static_cast<std::size_t>(logits.dim(0));
    if (targets.size() != rows) {
        throw std::invalid_argument("cross_entropy: one target per logits row required");
    }
    for (auto t : targets) {
        if (t < 0 || t >= vocab) {
            throw std::out_of_range("cross_entropy: target id outside the vocabulary");
        }
    }
    auto node = detail::make_node<Real>({1}, {logits.node()});
    std::vector<Real> lse(rows);
    const Real* lv = logits.data().data();
    double total = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        const Real* row = lv + r * static_cast<std::size_t>(vocab);
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < vocab; ++i) mx = std::max(mx, static_cast<double>(row[i]));
        double z = 0;
        for (int i = 0; i < vocab; ++i) z += std::exp(static_cast<double>(row[i]) - mx);
        const double l = mx + std::log(z);
        lse[r] = static_cast<Real>(l);
        total += l - static_cast<double>(row[targets[r]]);
    }
    node->value[0] = static_cast<Real>(total / static_cast<double>(rows));
    node->backward_fn = [vocab, rows, targets, lse = std::move(lse)](TensorNode<Real>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        const Real gscale = self.grad[0] / static_cast<Real>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t off = r * static_cast<std::size_t>(vocab);
            for (int i = 0; i < vocab; ++i) {
                const Real prob = std::exp(p.value[off + static_cast<std::size_t>(i)] - lse[r]);
                const Real onehot = (i == targets[r]) ? Real(1) : Real(0);
                p.grad[off + static_cast<std::size_t>(i)] += gscale * (prob - onehot);
            }
        }
    };
    return Tensor<Real>(node);
}

// ---------------------------------------------------------------------------
// Embedding lookup: ids index rows of the table; backward scatter-adds.
template <class Real>
Tensor<Real> embedding(const Tensor<Real>& table, const std::vector<std::int32_t>& ids, int batch,
                       int seq) {
    if (table.ndim() != 2) {
        throw std::invalid_argument("embedding: table must be 2-D");
    }
    if (static_cast<std::size_t>(batch) * static_cast<std::size_t>(seq) != ids.size()) {
        throw std::invalid_argument("embedding: ids length must equal batch*seq");
    }
    const int vocab = table.dim(0);
    const int dim = table.dim(1);
    for (auto id : ids) {
        if (id < 0 || id >= vocab) {
            throw std::out_of_range("embedding: id outside the vocabulary");
        }
    }
    auto node = detail::make_node<Real>({batch, seq, dim}, {table.node()});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const Real* src =
            table.data().data() + static_cast<std::size_t>(ids[i]) * static_cast<std::size_t>(dim);
        Real* dst = node->value.data() + i * static_cast<std::size_t>(dim);
        for (int j = 0; j < dim; ++j) dst[j] = src[j];
    }
    node->backward_fn = [ids, dim](TensorNode<Real>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const Real* g = self.grad.data() + i * static_cast<std::size_t>(dim);
            Real* dst =
                p.grad.data() + static_cast<std::size_t>(ids[i]) * static_cast<std::size_t>(dim);
            for (int j = 0; j < dim; ++j) dst[j] += g[j];
        }
    };
    return Tensor<Real>(node);
}

}  // namespace fp8lab
