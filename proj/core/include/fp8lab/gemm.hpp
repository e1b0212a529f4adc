// SPDX-License-Identifier: Apache-2.0
//
// GEMM kernels and the scaled FP8 matrix-multiplication pipeline:
//   GEMM(X, Y) = 1/(rho_X rho_Y) * FP8GEMM(cast(rho_X X), cast(rho_Y Y))
// with 32-bit accumulation over the decoded FP8 operands.

#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fp8lab/precision.hpp"
#include "fp8lab/scaling.hpp"

namespace fp8lab {

// Row-major C = alpha * op(A) op(B) + beta * C via BLAS.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc);

// Fixed BLAS thread count; 1 (the default) is deterministic everywhere,
// larger fixed counts are deterministic per machine.
void set_gemm_threads(int n);
int gemm_threads();

// Element-wise dst[i] = decode(encode(src[i] * rho)), counting saturations
// and flushes-to-zero.
template <class Real>
void quantize_with_scale(const Real* src, Real* dst, std::size_t n, const Fp8Format& format,
                         Real rho, CastStats* stats);

template <class Real>
Real absmax(const Real* x, std::size_t n);

// The end-to-end scaled FP8 GEMM on row-major matrices. Computes the scale of
// each operand from its history (an empty history is bootstrapped from the
// current abs-max), quantizes, multiplies with 32-bit accumulation, divides
// the result by rho_X * rho_Y, and records both abs-max values.
template <class Real>
void scaled_fp8_gemm(const Real* x, int m, int k, const Real* y, int k2, int n, Real* out,
                     ScalingHistory& hist_x, ScalingHistory& hist_y, CastStats* stats_x = nullptr,
                     CastStats* stats_y = nullptr);

// Scaling state of one matmul role: forward operands, their backward
// re-quantizations, and the output gradient, each with its own history.
// Operands use the forward format (E4M3) in both directions; only the output
// gradient uses the backward format (E5M2).
struct MatmulRoleState {
    ScalingHistory lhs_fwd;
    ScalingHistory rhs_fwd;
    ScalingHistory lhs_bwd;
    ScalingHistory rhs_bwd;
    ScalingHistory grad_out;

    MatmulRoleState(const Fp8Format& fwd, const Fp8Format& bwd, int capacity, int margin)
        : lhs_fwd(fwd, capacity, margin),
          rhs_fwd(fwd, capacity, margin),
          lhs_bwd(fwd, capacity, margin),
          rhs_bwd(fwd, capacity, margin),
          grad_out(bwd, capacity, margin) {}
};

// Shared precision state for one model: the policy, per-role scaling
// histories, cast statistics, and dispatch counters.
template <class Real>
class GemmContext {
public:
    GemmContext() = default;
    GemmContext(PrecisionPolicy policy, int history_capacity, int history_margin)
        : policy_(policy), capacity_(history_capacity), margin_(history_margin) {}

    const PrecisionPolicy& policy() const { return policy_; }
    void set_policy(const PrecisionPolicy& p) { policy_ = p; }
    int history_capacity() const { return capacity_; }
    int history_margin() const { return margin_; }

    MatmulRoleState& role_state(const std::string& name);
    bool has_role(const std::string& name) const { return roles_.count(name) > 0; }
    std::map<std::string, MatmulRoleState>& roles() { return roles_; }
    const std::map<std::string, MatmulRoleState>& roles() const { return roles_; }

    CastStatsRegistry& cast_stats() { return cast_stats_; }
    const CastStatsRegistry& cast_stats() const { return cast_stats_; }
    GemmCallCounters& counters() { return counters_; }
    const GemmCallCounters& counters() const { return counters_; }

    void begin_step() { cast_stats_.reset_counts(); }

private:
    PrecisionPolicy policy_{};
    int capacity_ = 1024;
    int margin_ = 0;
    std::map<std::string, MatmulRoleState> roles_;
    CastStatsRegistry cast_stats_;
    GemmCallCounters counters_;
};

extern template void quantize_with_scale<float>(const float*, float*, std::size_t,
                                                const Fp8Format&, float, CastStats*);
extern template void quantize_with_scale<double>(const double*, double*, std::size_t,
                                                 const Fp8Format&, double, CastStats*);
extern template float absmax<float>(const float*, std::size_t);
extern template double absmax<double>(const double*, std::size_t);
extern template void scaled_fp8_gemm<float>(const float*, int, int, const float*, int, int, float*,
                                            ScalingHistory&, ScalingHistory&, CastStats*,
                                            CastStats*);
extern template void scaled_fp8_gemm<double>(const double*, int, int, const double*, int, int,
                                             double*, ScalingHistory&, ScalingHistory&, CastStats*,
                                             CastStats*);

}  // namespace fp8lab
