// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "icdbert/model.hpp"
#include "icdbert/optimizer.hpp"

namespace icdbert {

/// Where a training run stands; enough to regenerate batch order and dropout masks.
struct TrainingCursor {
    std::uint64_t seed = 0;
    std::uint64_t epoch = 0;           ///< epoch currently in progress (0-based)
    std::uint64_t batch_in_epoch = 0;  ///< next batch index within that epoch
    std::uint64_t global_step = 0;     ///< optimizer steps taken

    friend bool operator==(const TrainingCursor&, const TrainingCursor&) = default;
};

struct Checkpoint {
    ModelParameters params;
    std::optional<AdamState> optimizer;
    TrainingCursor cursor;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Checkpoint archive (little-endian):
//   magic "ICDBCKPT", u32 version
//   config: u64 vocab_size, hidden, layers, heads, ff_dim, max_len, num_labels; f64 dropout, layer_norm_eps, init_std
//   cursor: u64 seed, epoch, batch_in_epoch, global_step
//   u32 has_optimizer, u64 adam step
//   u32 tensor count, then per section (parameters, first moments, second moments when present)
//     and per tensor: u32 name length, name bytes, u32 rank, u64 dims..., f64 values...
//   u64 FNV-1a checksum of every preceding byte
//
// The same layout with has_optimizer = 0 serves as the import format for externally
// trained weights.

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params, const AdamState* optimizer,
                     const TrainingCursor& cursor);

/// Loads a checkpoint with the configuration stored inside it.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Loads a checkpoint and requires every tensor to match the shapes `expected` implies.
/// A mismatch raises CheckpointError naming the first offending tensor.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace icdbert
