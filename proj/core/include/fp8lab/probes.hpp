// SPDX-License-Identifier: Apache-2.0
//
// Activation telemetry. The model pushes row views of the tracked tensors
// (FFN second-projection input, fused QKV projection output, block output)
// into a sink during forward; the sink reduces them to kurtosis records
// immediately, so probing never retains or perturbs activations.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fp8lab/kurtosis.hpp"

namespace fp8lab {

enum class ProbeKind : std::uint8_t { ffn_second_input, qkv, block_output };

const char* to_string(ProbeKind p);
ProbeKind probe_by_name(const std::string& name);

struct KurtosisRecord {
    std::int64_t step = 0;
    std::int64_t tokens = 0;
    ProbeKind probe = ProbeKind::qkv;
    int layer = -1;  // -1 is the cross-layer mean
    bool defined = false;
    double value = 0.0;
    std::int64_t skipped_positions = 0;

    static constexpr int mean_layer = -1;
};

template <class Real>
class ProbeSink {
public:
    explicit ProbeSink(KurtosisMode mode = KurtosisMode::population_variance) : mode_(mode) {}

    void add(ProbeKind probe, int layer, const RowBlock<Real>* blocks, int n_blocks,
             std::size_t rows) {
        const TensorKurtosis k = kurtosis_concat_rows(blocks, n_blocks, rows, mode_);
        KurtosisRecord rec;
        rec.probe = probe;
        rec.layer = layer;
        rec.defined = k.defined;
        rec.value = k.mean;
        rec.skipped_positions = k.rows_skipped;
        records_.push_back(rec);
    }

    void add(ProbeKind probe, int layer, const Real* data, std::size_t rows, int dim) {
        RowBlock<Real> block{data, dim};
        add(probe, layer, &block, 1, rows);
    }

    // One record per (probe, layer) plus the cross-layer mean per probe.
    std::vector<KurtosisRecord> finalize(std::int64_t step, std::int64_t tokens) const;

    const std::vector<KurtosisRecord>& layer_records() const { return records_; }
    void clear() { records_.clear(); }

private:
    KurtosisMode mode_;
    std::vector<KurtosisRecord> records_;
};

extern template class ProbeSink<float>;
extern template class ProbeSink<double>;

}  // namespace fp8lab
