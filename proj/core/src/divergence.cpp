// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/divergence.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fp8lab {

const char* to_string(DivergenceStatus s) {
    switch (s) {
        case DivergenceStatus::consistent: return "consistent";
        case DivergenceStatus::warning: return "warning";
        case DivergenceStatus::diverging: return "diverging";
    }
    return "?";
}

namespace {

struct LogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms_residual = 0.0;
};

// Least squares of y against log(t).
LogFit fit_log(const std::vector<std::pair<double, double>>& s, std::size_t begin,
               std::size_t end) {
    LogFit f;
    const double n = static_cast<double>(end - begin);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = begin; i < end; ++i) {
        const double x = std::log(s[i].first);
        const double y = s[i].second;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    if (denom != 0.0) {
        f.slope = (n * sxy - sx * sy) / denom;
        f.intercept = (sy - f.slope * sx) / n;
    } else {
        f.intercept = sy / n;
    }
    double ss = 0;
    for (std::size_t i = begin; i < end; ++i) {
        const double r = s[i].second - (f.intercept + f.slope * std::log(s[i].first));
        ss += r * r;
    }
    f.rms_residual = std::sqrt(ss / n);
    return f;
}

}  // namespace

DivergenceVerdict divergence_score(const std::vector<std::pair<double, double>>& series,
                                   const DivergenceConfig& config) {
    if (config.window < 2) {
        throw std::invalid_argument("divergence_score: window must hold at least two points");
    }
    for (const auto& [t, k] : series) {
        if (!(t > 0.0)) {
            throw std::invalid_argument("divergence_score: token counts must be positive");
        }
    }
    const std::size_t w = static_cast<std::size_t>(config.window);
    const std::size_t windows = series.size() / w;
    if (windows < 2) {
        throw std::invalid_argument("divergence_score: need at least two complete windows");
    }

    DivergenceVerdict verdict;
    int streak = 0;
    double last_ratio = 0.0;
    for (std::size_t j = 1; j < windows; ++j) {
        const LogFit base = fit_log(series, 0, j * w);
        const LogFit local = fit_log(series, j * w, (j + 1) * w);
        // Log-span of the window converts residual noise into a rate floor.
        const double span = std::log(series[(j + 1) * w - 1].first) - std::log(series[j * w].first);
        const double noise_rate = span > 0.0 ? base.rms_residual / span : 0.0;
        const double threshold_base = std::max(std::max(base.slope, 0.0), noise_rate);
        const double ratio =
            threshold_base > 0.0 ? local.slope / threshold_base
                                 : (local.slope > 0.0 ? std::numeric_limits<double>::infinity()
                                                      : 0.0);
        if (ratio >= config.diverge_multiplier) {
            ++streak;
        } else {
            streak = 0;
        }
        if (j == windows - 1) {
            verdict.fitted_growth = base.slope;
            last_ratio = ratio;
        }
    }
    verdict.exceed_streak = streak;
    verdict.residual_score = last_ratio;
    if (streak >= config.consecutive) {
        verdict.status = DivergenceStatus::diverging;
    } else if (last_ratio >= config.warn_multiplier) {
        verdict.status = DivergenceStatus::warning;
    } else {
        verdict.status = DivergenceStatus::consistent;
    }
    return verdict;
}

}  // namespace fp8lab
