// SPDX-License-Identifier: Apache-2.0
//
// Training configuration: a flat key-value text file mirrors these fields
// one to one; command-line overrides use the same keys. Unknown keys are
// rejected by name.

#pragma once

#include <cstdint>
#include <string>

#include "fp8lab/arch.hpp"
#include "fp8lab/precision.hpp"
#include "fp8lab/schedule.hpp"

namespace fp8lab {

struct TrainConfig {
    std::string arch = "fog-opt";
    int layers = 4;
    int hidden = 128;
    int ffn_hidden = 512;
    int heads = 4;
    int qk_groups = 2;
    int context = 256;
    int batch = 16;
    std::int64_t total_steps = 2000;
    std::int64_t warmup_steps = 100;
    std::int64_t cooldown_steps = 400;
    double peak_lr = 1e-3;
    double min_lr = 1e-8;
    double weight_decay = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double adam_eps = 1e-8;
    double grad_clip = 1.0;
    std::uint64_t seed = 42;
    std::string precision = "bf16";  // fp32 | bf16 | fp8 | fp8dpa
    std::string corpus;
    std::int64_t probe_stride = 1;  // 0 disables probing
    std::int64_t checkpoint_interval = 0;
    double softmax_scale = 0.0;
    double init_std = 0.02;
    double rope_base = 10000.0;
    double rms_eps = 1e-6;
    double qk_gamma_sq = 2.0;
    int scaling_history_len = 1024;
    int scaling_margin = 0;
    bool tied_embeddings = true;
    bool wd_cooldown = false;  // weight decay follows the lr through cooldown
    int threads = 1;
    double halt_factor = 3.0;  // diverged when loss exceeds factor * trailing min
    int halt_window = 500;
    int smooth_window = 100;  // trailing mean reported as the smoothed loss

    ModelConfig model_config() const;
    ScheduleConfig schedule() const;
    PrecisionPolicy policy() const;
    void validate() const;  // throws std::invalid_argument naming the problem

    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

// `key = value` lines, '#' comments; unknown keys rejected with the key name.
TrainConfig parse_config_file(const std::string& path);
TrainConfig parse_config_text(const std::string& text);

// Shared by the file parser and CLI flag overrides.
void apply_override(TrainConfig& config, const std::string& key, const std::string& value);

}  // namespace fp8lab
