// SPDX-License-Identifier: Apache-2.0
//
// Per-GEMM precision routing. A policy assigns one of {FP8, BF16, FP32} to
// each GEMM class; FP8 GEMMs use E4M3 forward operands and E5M2 gradients.

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "fp8lab/fp8.hpp"

namespace fp8lab {

enum class GemmPrecision : std::uint8_t { fp8, bf16, fp32 };

enum class RoleKind : std::uint8_t {
    linear,            // QKV / attention-output / FFN projections
    attention_scores,  // Q K^T
    attention_value,   // P V
    output_head,       // final vocabulary projection
};

const char* to_string(GemmPrecision p);
const char* to_string(RoleKind k);

struct PrecisionPolicy {
    GemmPrecision linear_ops = GemmPrecision::fp32;
    GemmPrecision attention_scores = GemmPrecision::fp32;
    GemmPrecision attention_value_gemm = GemmPrecision::fp32;
    GemmPrecision output_layer = GemmPrecision::fp32;

    const Fp8Format* forward_format = &Fp8Format::e4m3();
    const Fp8Format* backward_format = &Fp8Format::e5m2();

    GemmPrecision slot(RoleKind kind) const {
        switch (kind) {
            case RoleKind::linear: return linear_ops;
            case RoleKind::attention_scores: return attention_scores;
            case RoleKind::attention_value: return attention_value_gemm;
            case RoleKind::output_head: return output_layer;
        }
        throw std::logic_error("unknown role kind");
    }

    // The named training methods. The output head never runs FP8.
    static PrecisionPolicy fp32_all();
    static PrecisionPolicy bf16_all();
    static PrecisionPolicy fp8();     // attention GEMMs stay BF16
    static PrecisionPolicy fp8dpa();  // attention GEMMs in FP8 as well
    static PrecisionPolicy by_name(const std::string& name);
};

// Saturation / flush-to-zero counters for one quantized tensor role.
// Counts accumulate within a step and are reset at step start.
struct CastStats {
    std::uint64_t overflow = 0;   // values saturated to +-max_finite
    std::uint64_t underflow = 0;  // nonzero values flushed to zero
    double absmax = 0.0;          // last observed raw abs-max
};

class CastStatsRegistry {
public:
    CastStats& at(const std::string& key) { return stats_[key]; }
    void reset_counts() {
        for (auto& [k, s] : stats_) {
            s.overflow = 0;
            s.underflow = 0;
        }
    }
    std::uint64_t total_overflow() const {
        std::uint64_t n = 0;
        for (const auto& [k, s] : stats_) n += s.overflow;
        return n;
    }
    std::uint64_t total_underflow() const {
        std::uint64_t n = 0;
        for (const auto& [k, s] : stats_) n += s.underflow;
        return n;
    }
    const std::map<std::string, CastStats>& all() const { return stats_; }

private:
    std::map<std::string, CastStats> stats_;
};

// Counts GEMM dispatches per (role kind, precision path); forward and each
// backward GEMM count as one call.
class GemmCallCounters {
public:
    void record(RoleKind kind, GemmPrecision path) { counts_[{kind, path}]++; }
    std::uint64_t count(RoleKind kind, GemmPrecision path) const {
        auto it = counts_.find({kind, path});
        return it == counts_.end() ? 0 : it->second;
    }
    void reset() { counts_.clear(); }

private:
    std::map<std::pair<RoleKind, GemmPrecision>, std::uint64_t> counts_;
};

}  // namespace fp8lab
