// SPDX-License-Identifier: Apache-2.0
//
// Delayed-scaling state: a bounded history of abs-max values per tensor
// role. The scale for the current step is computed from past observations
// only; the current abs-max is recorded for the next step.

#pragma once

#include <cstddef>
#include <deque>

#include "fp8lab/fp8.hpp"

namespace fp8lab {

class ScalingHistory {
public:
    ScalingHistory(const Fp8Format& format, int capacity, int margin);

    // Prepends the newest abs-max observation and drops the oldest entry
    // beyond capacity. Throws std::invalid_argument on negative input.
    void push(double tensor_absmax);

    // rho = max_finite / (2^margin * max(entries)).
    // Empty history or an all-zero history yields rho = 1 (zero tensors are
    // representable at any scale; callers bootstrap an empty history first).
    double scale() const;

    double max_entry() const;  // 0 when empty

    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    int capacity() const { return capacity_; }
    int margin() const { return margin_; }
    const Fp8Format& format() const { return *format_; }
    const std::deque<double>& entries() const { return entries_; }

    void assign(std::deque<double> entries);  // checkpoint restore

private:
    const Fp8Format* format_;
    int capacity_;
    int margin_;
    std::deque<double> entries_;  // newest first
};

inline double compute_scale(const ScalingHistory& history) { return history.scale(); }
inline void update_history(ScalingHistory& history, double tensor_absmax) {
    history.push(tensor_absmax);
}

}  // namespace fp8lab
