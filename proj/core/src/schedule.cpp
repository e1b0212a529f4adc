// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace fp8lab {

double lr_at_step(std::int64_t t, const ScheduleConfig& c) {
    if (t < 0 || t > c.total_steps) {
        throw std::out_of_range("lr_at_step: step outside the schedule");
    }
    if (c.warmup_steps + c.cooldown_steps > c.total_steps) {
        throw std::invalid_argument("lr_at_step: warmup + cooldown exceed total steps");
    }
    if (t <= c.warmup_steps && c.warmup_steps > 0) {
        return c.peak_lr * static_cast<double>(t) / static_cast<double>(c.warmup_steps);
    }
    const std::int64_t cooldown_start = c.total_steps - c.cooldown_steps;
    if (t > cooldown_start && c.cooldown_steps > 0) {
        const double p = static_cast<double>(t - cooldown_start) /
                         static_cast<double>(c.cooldown_steps);
        return c.min_lr + (c.peak_lr - c.min_lr) * (1.0 - std::sqrt(p));
    }
    return c.peak_lr;
}

}  // namespace fp8lab
