// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/probes.hpp"

#include <stdexcept>

namespace fp8lab {

const char* to_string(ProbeKind p) {
    switch (p) {
        case ProbeKind::ffn_second_input: return "ffn_second_input";
        case ProbeKind::qkv: return "qkv";
        case ProbeKind::block_output: return "block_output";
    }
    return "?";
}

ProbeKind probe_by_name(const std::string& name) {
    if (name == "ffn_second_input") return ProbeKind::ffn_second_input;
    if (name == "qkv") return ProbeKind::qkv;
    if (name == "block_output") return ProbeKind::block_output;
    throw std::invalid_argument("unknown probe: " + name);
}

template <class Real>
std::vector<KurtosisRecord> ProbeSink<Real>::finalize(std::int64_t step,
                                                      std::int64_t tokens) const {
    std::vector<KurtosisRecord> out;
    out.reserve(records_.size() + 3);
    for (ProbeKind probe :
         {ProbeKind::ffn_second_input, ProbeKind::qkv, ProbeKind::block_output}) {
        double sum = 0.0;
        std::int64_t defined_layers = 0;
        std::int64_t skipped = 0;
        for (const auto& r : records_) {
            if (r.probe != probe) continue;
            KurtosisRecord rec = r;
            rec.step = step;
            rec.tokens = tokens;
            out.push_back(rec);
            if (r.defined) {
                sum += r.value;
                ++defined_layers;
            }
            skipped += r.skipped_positions;
        }
        KurtosisRecord mean;
        mean.step = step;
        mean.tokens = tokens;
        mean.probe = probe;
        mean.layer = KurtosisRecord::mean_layer;
        mean.defined = defined_layers > 0;
        mean.value = defined_layers > 0 ? sum / static_cast<double>(defined_layers) : 0.0;
        mean.skipped_positions = skipped;
        out.push_back(mean);
    }
    return out;
}

template class ProbeSink<float>;
template class ProbeSink<double>;

}  // namespace fp8lab
