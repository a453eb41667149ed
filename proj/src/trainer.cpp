// SPDX-License-Identifier: Apache-2.0
#include "icdbert/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "icdbert/csv.hpp"
#include "icdbert/encoder.hpp"
#include "icdbert/error.hpp"
#include "icdbert/rng.hpp"

namespace icdbert {

std::string_view to_string(LrSchedule schedule) {
    return schedule == LrSchedule::constant ? "constant" : "linear_warmup";
}

LrSchedule parse_lr_schedule(std::string_view text) {
    if (text == "constant") return LrSchedule::constant;
    if (text == "linear_warmup") return LrSchedule::linear_warmup;
    throw ConfigError(fmt::format("unknown learning-rate schedule '{}'", text));
}

void TrainingConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError(fmt::format("learning_rate must be finite and >= 0 (got {})", learning_rate));
    }
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (grad_accum < 1) throw ConfigError("grad_accum must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
        throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(adam.epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
}

TrainingState TrainingState::start(ModelParameters params, std::uint64_t seed) {
    TrainingState s;
    s.optimizer = AdamState::for_model(params.config);
    s.params = std::move(params);
    s.cursor.seed = seed;
    return s;
}

TrainingState TrainingState::resume(Checkpoint checkpoint) {
    if (!checkpoint.optimizer) {
        throw CheckpointError("checkpoint carries no optimizer state and cannot be resumed");
    }
    TrainingState s;
    s.params = std::move(checkpoint.params);
    s.optimizer = std::move(*checkpoint.optimizer);
    s.cursor = checkpoint.cursor;
    return s;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, "batch-order", epoch));
    rng.shuffle(order.begin(), order.end());
    return order;
}

namespace {

std::size_t batches_per_epoch(std::size_t n, const TrainingConfig& config) {
    return (n + config.batch_size - 1) / config.batch_size;
}

std::size_t planned_steps(std::size_t n, const TrainingConfig& config) {
    const std::size_t total = steps_per_epoch(n, config) * config.epochs;
    return config.max_steps ? std::min(total, config.max_steps) : total;
}

void add_scaled(ModelParameters& into, const ModelParameters& from, double weight) {
    auto dst = tensor_list(into);
    auto src = tensor_list(from);
    for (std::size_t t = 0; t < dst.size(); ++t) {
        auto& d = dst[t]->values;
        const auto& s = src[t]->values;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += weight * s[i];
    }
}

using Clock = std::chrono::steady_clock;

EpochMetrics run_epoch(TrainingState& state, std::span<const EncodedExample> data, const TrainingConfig& config,
                       std::size_t total_steps, Clock::time_point started) {
    if (data.empty()) throw ConfigError("training data is empty");
    config.validate();
    auto& cursor = state.cursor;
    const std::size_t n = data.size();
    const std::size_t n_batches = batches_per_epoch(n, config);
    const std::size_t n_steps = steps_per_epoch(n, config);
    const auto order = epoch_order(n, cursor.seed, cursor.epoch);
    const std::uint64_t dropout_seed = derive_seed(cursor.seed, "dropout", 0);

    EpochMetrics metrics;
    double epoch_loss = 0.0;
    double pending_loss = 0.0;
    std::size_t pending = 0;
    auto flush = [&] {
        if (pending == 0) return;
        LogRow row;
        row.epoch = cursor.epoch + 1;
        row.step = cursor.global_step;
        row.loss = pending_loss / static_cast<double>(pending);
        if (config.record_wall_time) {
            row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started).count();
        }
        state.log.push_back(row);
        pending_loss = 0.0;
        pending = 0;
    };

    std::size_t step = cursor.batch_in_epoch / config.grad_accum;
    std::vector<EncodedExample> batch;
    for (; step < n_steps; ++step) {
        if (config.max_steps && cursor.global_step >= config.max_steps) break;
        const std::size_t first_batch = step * config.grad_accum;
        const std::size_t last_batch = std::min(first_batch + config.grad_accum, n_batches);
        const std::size_t first_example = first_batch * config.batch_size;
        const std::size_t step_examples = std::min(last_batch * config.batch_size, n) - first_example;

        ModelParameters grads = ModelParameters::zeros(state.params.config);
        double step_loss = 0.0;
        try {
            for (std::size_t b = first_batch; b < last_batch; ++b) {
                batch.clear();
                const std::size_t end = std::min((b + 1) * config.batch_size, n);
                for (std::size_t i = b * config.batch_size; i < end; ++i) batch.push_back(data[order[i]]);
                ForwardOptions options;
                options.training = true;
                options.dropout_seed = dropout_seed;
                options.step = cursor.global_step * config.grad_accum + (b - first_batch);
                options.workers = config.workers;
                auto result = compute_gradients(batch, state.params, options);
                const double weight = static_cast<double>(batch.size()) / static_cast<double>(step_examples);
                add_scaled(grads, result.gradients, weight);
                step_loss += weight * result.loss;
            }
            adam_step(state.params, grads, state.optimizer, scheduled_lr(config, cursor.global_step, total_steps),
                      config.adam);
        } catch (const NumericError& e) {
            throw NumericError(fmt::format("training step {}: {}", cursor.global_step + 1, e.what()));
        }

        ++cursor.global_step;
        cursor.batch_in_epoch = last_batch;
        ++metrics.steps;
        epoch_loss += step_loss;
        pending_loss += step_loss;
        ++pending;
        if (cursor.global_step % config.eval_every == 0) flush();
    }
    flush();
    if (step >= n_steps) {
        ++cursor.epoch;
        cursor.batch_in_epoch = 0;
    }
    metrics.mean_loss = metrics.steps ? epoch_loss / static_cast<double>(metrics.steps) : 0.0;
    return metrics;
}

}  // namespace

std::size_t steps_per_epoch(std::size_t n, const TrainingConfig& config) {
    return (batches_per_epoch(n, config) + config.grad_accum - 1) / config.grad_accum;
}

double scheduled_lr(const TrainingConfig& config, std::size_t step, std::size_t total_steps) {
    if (config.schedule == LrSchedule::constant) return config.learning_rate;
    const double s = static_cast<double>(step);
    if (config.warmup_steps > 0 && step < config.warmup_steps) {
        return config.learning_rate * (s + 1.0) / static_cast<double>(config.warmup_steps);
    }
    if (total_steps <= config.warmup_steps) return config.learning_rate;
    const double remaining = static_cast<double>(total_steps - step);
    return config.learning_rate * std::max(0.0, remaining / static_cast<double>(total_steps - config.warmup_steps));
}

EpochMetrics train_epoch(TrainingState& state, std::span<const EncodedExample> data, const TrainingConfig& config) {
    return run_epoch(state, data, config, planned_steps(data.size(), config), Clock::now());
}

std::string epoch_checkpoint_name(std::size_t epoch) { return fmt::format("epoch_{}.ckpt", epoch); }

FineTuneResult fine_tune(TrainingState state, std::span<const EncodedExample> data, const TrainingConfig& config) {
    config.validate();
    if (data.empty()) throw ConfigError("training data is empty");
    if (state.cursor.seed != config.seed) {
        throw ConfigError(fmt::format("resume seed {} differs from configured seed {}", state.cursor.seed, config.seed));
    }
    const auto& dir = config.checkpoint_dir;
    const bool persist = !dir.empty();
    if (persist) {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
        const auto log_path = dir / kTrainLogFile;
        if (state.log.empty() && state.cursor.global_step > 0 && std::filesystem::exists(log_path)) {
            state.log = read_training_log(log_path);
            std::erase_if(state.log, [&](const LogRow& r) { return r.step > state.cursor.global_step; });
        }
    }

    FineTuneResult result;
    const std::size_t total_steps = planned_steps(data.size(), config);
    const auto started = Clock::now();
    auto save = [&](const std::filesystem::path& path) {
        save_checkpoint(path, state.params, &state.optimizer, state.cursor);
    };
    while (state.cursor.epoch < config.epochs) {
        if (config.max_steps && state.cursor.global_step >= config.max_steps) break;
        const auto epoch_before = state.cursor.epoch;
        result.epochs.push_back(run_epoch(state, data, config, total_steps, started));
        if (persist) {
            write_training_log(dir / kTrainLogFile, state.log);
            if (state.cursor.epoch > epoch_before) save(dir / epoch_checkpoint_name(state.cursor.epoch));
        }
    }
    if (persist) save(dir / kLastCheckpointFile);
    result.state = std::move(state);
    return result;
}

void write_training_log(const std::filesystem::path& path, std::span<const LogRow> rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,step,loss,wall_ms\n";
    for (const auto& r : rows) out << fmt::format("{},{},{:.17g},{}\n", r.epoch, r.step, r.loss, r.wall_ms);
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<LogRow> read_training_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    csv::Reader reader(in);
    std::vector<std::string> fields;
    if (!reader.next(fields) || fields != std::vector<std::string>{"epoch", "step", "loss", "wall_ms"}) {
        throw SchemaError(path.string() + ": expected header epoch,step,loss,wall_ms");
    }
    std::vector<LogRow> rows;
    while (reader.next(fields)) {
        if (fields.size() != 4) throw RecordError(reader.record_line(), "expected 4 fields");
        try {
            LogRow r;
            r.epoch = std::stoull(fields[0]);
            r.step = std::stoull(fields[1]);
            r.loss = std::stod(fields[2]);
            r.wall_ms = std::stoll(fields[3]);
            rows.push_back(r);
        } catch (const std::logic_error&) {
            throw RecordError(reader.record_line(), "malformed number");
        }
    }
    return rows;
}

}  // namespace icdbert
