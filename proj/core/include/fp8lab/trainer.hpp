// SPDX-License-Identifier: Apache-2.0
//
// The desk-scale training loop: forward under the configured precision
// method, cross-entropy loss, backward, global-norm clipping, AdamW with the
// warmup-steady-decay schedule, per-step metrics, kurtosis probes on a
// stride, periodic checkpoints, and a divergence halt.

#pragma once

#include <cstdint>
#include <string>

#include "fp8lab/train_config.hpp"

namespace fp8lab {

enum class RunStatus { completed, diverged, error };

const char* to_string(RunStatus s);

struct TrainResult {
    RunStatus status = RunStatus::error;
    std::int64_t final_step = 0;
    std::int64_t tokens = 0;
    double final_loss = 0.0;
    double smoothed_loss = 0.0;  // trailing-window mean of the loss
    std::string message;
};

// Runs the configured training into run_dir (created if needed): writes
// metrics.jsonl, checkpoints, and a final checkpoint on completion. With a
// resume checkpoint the config snapshot stored there takes over and the loss
// stream continues bit-exactly. Throws std::invalid_argument for config
// errors; runtime failures surface as RunStatus::error.
TrainResult train(const TrainConfig& config, const std::string& run_dir,
                  const std::string& resume_checkpoint = "");

}  // namespace fp8lab
