// SPDX-License-Identifier: Apache-2.0
//
// Append-only metrics stream: one JSON object per line per step, plus a
// reader used by export and comparison tooling.

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fp8lab/probes.hpp"

namespace fp8lab {

struct StepMetrics {
    std::int64_t step = 0;
    std::int64_t tokens = 0;
    double lr = 0.0;
    double loss = 0.0;
    double grad_norm_preclip = 0.0;
    std::uint64_t cast_overflow = 0;
    std::uint64_t cast_underflow = 0;
    std::vector<KurtosisRecord> kurtosis;  // empty on off-stride steps
};

class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path);
    void write(const StepMetrics& m);
    void flush();

private:
    std::ofstream out_;
};

std::string metrics_line(const StepMetrics& m);

// Reads a metrics stream back. Throws std::runtime_error on unreadable or
// malformed files.
std::vector<StepMetrics> read_metrics(const std::string& path);

}  // namespace fp8lab
