// SPDX-License-Identifier: Apache-2.0
//
// Divergence prediction from a kurtosis time series. Healthy runs grow
// sub-linearly to logarithmically in tokens; the monitor fits k ~ a + b
// log(t) on the history and flags windows whose local growth rate exceeds
// the fitted trend by configured multipliers.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace fp8lab {

enum class DivergenceStatus { consistent, warning, diverging };

const char* to_string(DivergenceStatus s);

struct DivergenceConfig {
    int window = 200;               // points per window
    double warn_multiplier = 3.0;   // local rate vs fitted rate
    double diverge_multiplier = 10.0;
    int consecutive = 3;            // windows over the strong threshold
};

struct DivergenceVerdict {
    DivergenceStatus status = DivergenceStatus::consistent;
    double fitted_growth = 0.0;   // b of the baseline log fit
    double residual_score = 0.0;  // latest window's rate over the threshold base
    int exceed_streak = 0;        // trailing windows over the strong threshold
};

// series: ordered (tokens, kurtosis) pairs, tokens strictly positive and
// increasing. Throws std::invalid_argument with fewer than two complete
// windows. Deterministic.
DivergenceVerdict divergence_score(const std::vector<std::pair<double, double>>& series,
                                   const DivergenceConfig& config);

}  // namespace fp8lab
