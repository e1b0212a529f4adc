// SPDX-License-Identifier: Apache-2.0
//
// Command-level operations behind the CLI: run training with a manifest,
// paired-precision comparison, checkpoint diagnosis, and metric export.
// Exit-code contract: 0 completed, 1 usage/config error, 2 diverged,
// 3 internal error.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fp8lab/divergence.hpp"
#include "fp8lab/trainer.hpp"

namespace fp8lab {

inline constexpr int exit_completed = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_diverged = 2;
inline constexpr int exit_internal = 3;

struct RunManifest {
    std::string run_id;
    std::string config_path;
    std::string config_sha256;
    std::string started_at;
    std::string finished_at;
    std::string status;  // running | completed | diverged | error
    std::int64_t final_step = 0;
    std::string precision;
    std::string resume_from;
    std::vector<std::pair<std::string, std::string>> overrides;
};

void write_manifest(const std::string& run_dir, const RunManifest& manifest);
RunManifest read_manifest(const std::string& run_dir);

std::string sha256_hex(const std::string& bytes);
std::string sha256_hex_of_file(const std::string& path);
std::string iso8601_utc_now();

using Overrides = std::vector<std::pair<std::string, std::string>>;

struct TrainCommand {
    std::string config_path;
    Overrides overrides;
    std::string run_dir;  // created; must not contain a previous manifest
    std::string resume_checkpoint;
};

struct TrainCommandResult {
    int exit_code = exit_internal;
    TrainResult result;
    std::string run_dir;
};

// Loads and validates the config, writes the manifest, trains, finalizes the
// manifest. Config/usage problems throw std::invalid_argument (exit 1 at the
// CLI); runtime errors are caught and reported as exit 3 with an error
// manifest.
TrainCommandResult cmd_train(const TrainCommand& cmd);

struct CompareRow {
    std::string method;
    std::string status;
    double final_loss = 0.0;
    double smoothed_loss = 0.0;
    double mean_qkv_kurtosis = 0.0;
    std::string divergence_verdict;  // monitor verdict or "insufficient-data"
    std::string run_dir;
};

struct CompareReport {
    CompareRow bf16;
    CompareRow fp8dpa;
    double loss_gap_abs = 0.0;
    double loss_gap_rel = 0.0;  // relative to the BF16 smoothed loss
    std::string to_text() const;
};

// Runs the config twice with a shared seed and data stream, once BF16 and
// once FP8DPA, into out_root/bf16 and out_root/fp8dpa. With parallel=true the
// two trainings run on separate threads (BLAS stays single-threaded).
CompareReport cmd_compare(const std::string& config_path, const Overrides& overrides,
                          const std::string& out_root, bool parallel,
                          const DivergenceConfig& monitor = {});

// One forward pass over a deterministic batch; writes a per-layer per-probe
// kurtosis table (layers x probes rows) to csv_path.
void cmd_diagnose(const std::string& checkpoint_path, const std::string& corpus_path,
                  const std::string& csv_path);

// Extracts named series against tokens from a run's metrics stream into
// <run_dir>/export_<series>.csv. Known series: loss, grad_norm, lr,
// kurt_<probe> (cross-layer mean) and kurt_<probe>_L<layer>.
void cmd_export(const std::string& run_dir, const std::vector<std::string>& series);

std::string list_architectures_text();

// Measures the divergence verdict of a metric stream's mean QKV kurtosis.
std::string kurtosis_verdict(const std::string& metrics_path, const DivergenceConfig& monitor);

}  // namespace fp8lab
