// SPDX-License-Identifier: Apache-2.0
//
// Warmup-steady-decay learning rate: linear ramp to the peak, a constant
// plateau, then the 1-sqrt cooldown eta(p) = min + (peak - min) * (1 - sqrt(p)).

#pragma once

#include <cstdint>

namespace fp8lab {

struct ScheduleConfig {
    std::int64_t total_steps = 0;
    std::int64_t warmup_steps = 0;
    std::int64_t cooldown_steps = 0;
    double peak_lr = 0.0;
    double min_lr = 0.0;
};

// Defined for 0 <= t <= total_steps; continuous at both phase boundaries.
double lr_at_step(std::int64_t t, const ScheduleConfig& config);

}  // namespace fp8lab
