// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/gemm.hpp"

#include <cblas.h>

#include <cmath>
#include <stdexcept>

namespace fp8lab {

namespace {
int g_threads = 1;
}

void set_gemm_threads(int n) {
    if (n < 1) {
        throw std::invalid_argument("set_gemm_threads: thread count must be >= 1");
    }
    g_threads = n;
    openblas_set_num_threads(n);
}

int gemm_threads() { return g_threads; }

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <class Real>
Real absmax(const Real* x, std::size_t n) {
    Real m = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Real a = std::fabs(x[i]);
        if (a > m) {
            m = a;
        }
    }
    return m;
}

template <class Real>
void quantize_with_scale(const Real* src, Real* dst, std::size_t n, const Fp8Format& format,
                         Real rho, CastStats* stats) {
    const auto& table = decode_table(format);
    const Real max_finite = static_cast<Real>(format.max_finite);
    std::uint64_t overflow = 0;
    std::uint64_t underflow = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Real scaled = src[i] * rho;
        const std::uint8_t code = encode_fp8(scaled, format);
        const Real q = static_cast<Real>(table[code]);
        if (std::fabs(scaled) > max_finite) {
            ++overflow;
        } else if (scaled != Real(0) && q == Real(0)) {
            ++underflow;
        }
        dst[i] = q;
    }
    if (stats != nullptr) {
        stats->overflow += overflow;
        stats->underflow += underflow;
    }
}

template <class Real>
void scaled_fp8_gemm(const Real* x, int m, int k, const Real* y, int k2, int n, Real* out,
                     ScalingHistory& hist_x, ScalingHistory& hist_y, CastStats* stats_x,
                     CastStats* stats_y) {
    if (k != k2) {
        throw std::invalid_argument("scaled_fp8_gemm: inner dimensions do not match");
    }
    const Real amax_x = absmax(x, static_cast<std::size_t>(m) * k);
    const Real amax_y = absmax(y, static_cast<std::size_t>(k) * n);

    const bool boot_x = hist_x.empty();
    const bool boot_y = hist_y.empty();
    if (boot_x) hist_x.push(amax_x);
    if (boot_y) hist_y.push(amax_y);

    const Real rho_x = static_cast<Real>(hist_x.scale());
    const Real rho_y = static_cast<Real>(hist_y.scale());

    std::vector<Real> qx(static_cast<std::size_t>(m) * k);
    std::vector<Real> qy(static_cast<std::size_t>(k) * n);
    quantize_with_scale(x, qx.data(), qx.size(), hist_x.format(), rho_x, stats_x);
    quantize_with_scale(y, qy.data(), qy.size(), hist_y.format(), rho_y, stats_y);
    if (stats_x != nullptr) stats_x->absmax = static_cast<double>(amax_x);
    if (stats_y != nullptr) stats_y->absmax = static_cast<double>(amax_y);

    gemm(false, false, m, n, k, Real(1), qx.data(), k, qy.data(), n, Real(0), out, n);
    const Real denom = rho_x * rho_y;
    for (std::size_t i = 0; i < static_cast<std::size_t>(m) * n; ++i) {
        out[i] /= denom;
    }

    if (!boot_x) hist_x.push(amax_x);
    if (!boot_y) hist_y.push(amax_y);
}

template void quantize_with_scale<float>(const float*, float*, std::size_t, const Fp8Format&,
                                         float, CastStats*);
template void quantize_with_scale<double>(const double*, double*, std::size_t, const Fp8Format&,
                                          double, CastStats*);
template float absmax<float>(const float*, std::size_t);
template double absmax<double>(const double*, std::size_t);
template void scaled_fp8_gemm<float>(const float*, int, int, const float*, int, int, float*,
                                     ScalingHistory&, ScalingHistory&, CastStats*, CastStats*);
template void scaled_fp8_gemm<double>(const double*, int, int, const double*, int, int, double*,
                                      ScalingHistory&, ScalingHistory&, CastStats*, CastStats*);

template <class Real>
MatmulRoleState& GemmContext<Real>::role_state(const std::string& name) {
    auto it = roles_.find(name);
    if (it == roles_.end()) {
        it = roles_
                 .emplace(name, MatmulRoleState(*policy_.forward_format, *policy_.backward_format,
                                                capacity_, margin_))
                 .first;
    }
    return it->second;
}

template class GemmContext<float>;
template class GemmContext<double>;

const char* to_string(GemmPrecision p) {
    switch (p) {
        case GemmPrecision::fp8: return "fp8";
        case GemmPrecision::bf16: return "bf16";
        case GemmPrecision::fp32: return "fp32";
    }
    return "?";
}

const char* to_string(RoleKind k) {
    switch (k) {
        case RoleKind::linear: return "linear";
        case RoleKind::attention_scores: return "attention_scores";
        case RoleKind::attention_value: return "attention_value";
        case RoleKind::output_head: return "output_head";
    }
    return "?";
}

PrecisionPolicy PrecisionPolicy::fp32_all() { return PrecisionPolicy{}; }

PrecisionPolicy PrecisionPolicy::bf16_all() {
    PrecisionPolicy p;
    p.linear_ops = GemmPrecision::bf16;
    p.attention_scores = GemmPrecision::bf16;
    p.attention_value_gemm = GemmPrecision::bf16;
    p.output_layer = GemmPrecision::bf16;
    return p;
}

PrecisionPolicy PrecisionPolicy::fp8() {
    PrecisionPolicy p;
    p.linear_ops = GemmPrecision::fp8;
    p.attention_scores = GemmPrecision::bf16;
    p.attention_value_gemm = GemmPrecision::bf16;
    p.output_layer = GemmPrecision::bf16;
    return p;
}

PrecisionPolicy PrecisionPolicy::fp8dpa() {
    PrecisionPolicy p;
    p.linear_ops = GemmPrecision::fp8;
    p.attention_scores = GemmPrecision::fp8;
    p.attention_value_gemm = GemmPrecision::fp8;
    p.output_layer = GemmPrecision::bf16;
    return p;
}

PrecisionPolicy PrecisionPolicy::by_name(const std::string& name) {
    if (name == "fp32") return fp32_all();
    if (name == "bf16") return bf16_all();
    if (name == "fp8") return fp8();
    if (name == "fp8dpa") return fp8dpa();
    throw std::invalid_argument("unknown precision method: " + name);
}

}  // namespace fp8lab
