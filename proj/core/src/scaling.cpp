// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fp8lab {

ScalingHistory::ScalingHistory(const Fp8Format& format, int capacity, int margin)
    : format_(&format), capacity_(capacity), margin_(margin) {
    if (capacity <= 0) {
        throw std::invalid_argument("ScalingHistory: capacity must be positive");
    }
}

void ScalingHistory::push(double tensor_absmax) {
    if (!(tensor_absmax >= 0.0)) {
        throw std::invalid_argument("ScalingHistory: abs-max must be non-negative");
    }
    entries_.push_front(tensor_absmax);
    while (entries_.size() > static_cast<std::size_t>(capacity_)) {
        entries_.pop_back();
    }
}

double ScalingHistory::max_entry() const {
    if (entries_.empty()) {
        return 0.0;
    }
    return *std::max_element(entries_.begin(), entries_.end());
}

double ScalingHistory::scale() const {
    const double h = max_entry();
    if (h <= 0.0) {
        return 1.0;
    }
    return format_->max_finite / (std::ldexp(1.0, margin_) * h);
}

void ScalingHistory::assign(std::deque<double> entries) {
    for (double e : entries) {
        if (!(e >= 0.0)) {
            throw std::invalid_argument("ScalingHistory: abs-max must be non-negative");
        }
    }
    while (entries.size() > static_cast<std::size_t>(capacity_)) {
        entries.pop_back();
    }
    entries_ = std::move(entries);
}

}  // namespace fp8lab
