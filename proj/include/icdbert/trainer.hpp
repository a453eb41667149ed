// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "icdbert/checkpoint.hpp"
#include "icdbert/model.hpp"
#include "icdbert/optimizer.hpp"
#include "icdbert/tokenizer.hpp"

namespace icdbert {

enum class LrSchedule { constant, linear_warmup };

std::string_view to_string(LrSchedule schedule);
LrSchedule parse_lr_schedule(std::string_view text);

struct TrainingConfig {
    /// Zero leaves the parameters untouched, which makes a null-update check possible.
    double learning_rate = 3e-5;
    std::size_t epochs = 1;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    /// Log a row every `eval_every` optimizer steps (and at every epoch end).
    std::size_t eval_every = 10;
    /// Empty: keep everything in memory.
    std::filesystem::path checkpoint_dir;
    /// Stop after this many optimizer steps in total; 0 means no cap.
    std::size_t max_steps = 0;
    /// Micro-batches of `batch_size` combined into one optimizer step.
    std::size_t grad_accum = 1;
    LrSchedule schedule = LrSchedule::constant;
    std::size_t warmup_steps = 0;
    AdamHyper adam;
    std::size_t workers = 1;
    /// Off by default so that logs are byte-identical across runs.
    bool record_wall_time = false;

    /// Throws ConfigError on the first violated invariant.
    void validate() const;
};

struct LogRow {
    std::size_t epoch = 0;  ///< 1-based
    std::size_t step = 0;   ///< optimizer steps completed
    double loss = 0.0;      ///< mean step loss since the previous row
    std::int64_t wall_ms = 0;

    friend bool operator==(const LogRow&, const LogRow&) = default;
};

struct EpochMetrics {
    double mean_loss = 0.0;
    std::size_t steps = 0;
};

struct TrainingState {
    ModelParameters params;
    AdamState optimizer;
    TrainingCursor cursor;
    std::vector<LogRow> log;

    /// Fresh optimizer and cursor for `params`.
    static TrainingState start(ModelParameters params, std::uint64_t seed);
    /// Continue from a checkpoint that carries optimizer state.
    static TrainingState resume(Checkpoint checkpoint);
};

/// Batch order for one epoch: a seeded permutation of [0, n).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

/// Optimizer steps in one epoch of `n` examples.
std::size_t steps_per_epoch(std::size_t n, const TrainingConfig& config);

/// Learning rate applied at optimizer step `step` (0-based) of a run with `total_steps`.
double scheduled_lr(const TrainingConfig& config, std::size_t step, std::size_t total_steps);

/// Runs the rest of the current epoch from `state.cursor`, appending log rows to `state.log`.
/// Stops early when `config.max_steps` is reached. The cursor advances to the next epoch
/// only when the epoch is finished.
EpochMetrics train_epoch(TrainingState& state, std::span<const EncodedExample> data, const TrainingConfig& config);

struct FineTuneResult {
    TrainingState state;
    std::vector<EpochMetrics> epochs;
};

/// Runs until `config.epochs` epochs (or `config.max_steps` steps) are complete. With a
/// checkpoint directory, writes epoch_<k>.ckpt at the end of epoch k, last.ckpt whenever
/// training stops, and train_log.csv.
FineTuneResult fine_tune(TrainingState state, std::span<const EncodedExample> data, const TrainingConfig& config);

/// Append-only training log: epoch,step,loss,wall_ms
void write_training_log(const std::filesystem::path& path, std::span<const LogRow> rows);
std::vector<LogRow> read_training_log(const std::filesystem::path& path);

inline constexpr std::string_view kTrainLogFile = "train_log.csv";
inline constexpr std::string_view kLastCheckpointFile = "last.ckpt";
std::string epoch_checkpoint_name(std::size_t epoch);

}  // namespace icdbert
