// SPDX-License-Identifier: Apache-2.0
//
// Versioned little-endian checkpoint container: magic header, config JSON
// block, raw parameter/optimizer buffers, delayed-scaling histories, data
// iterator state, and the divergence-halt window. Reload then continue
// reproduces the original run bit for bit.

#pragma once

#include <cstdint>
#include <deque>
#include <string>

#include "fp8lab/corpus.hpp"
#include "fp8lab/model.hpp"
#include "fp8lab/optimizer.hpp"
#include "fp8lab/train_config.hpp"

namespace fp8lab {

inline constexpr char checkpoint_magic[8] = {'F', 'P', '8', 'L', 'A', 'B', 'C', 'K'};
inline constexpr std::uint32_t checkpoint_version = 1;

struct TrainerState {
    std::int64_t step = 0;
    std::int64_t tokens = 0;
    std::deque<double> trailing_losses;
};

void save_checkpoint(const std::string& path, const TrainConfig& config,
                     const Model<float>& model, const AdamW& optimizer,
                     const BatchIterator& iterator, const TrainerState& state);

// Reads only the config snapshot (to rebuild model/optimizer before loading).
TrainConfig read_checkpoint_config(const std::string& path);

// Restores buffers into an already-built model/optimizer/iterator. Throws on
// magic/version mismatch or layout disagreement.
TrainerState load_checkpoint(const std::string& path, Model<float>& model, AdamW& optimizer,
                             BatchIterator& iterator);

}  // namespace fp8lab
