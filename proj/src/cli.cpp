// SPDX-License-Identifier: Apache-2.0
#include "icdbert/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "icdbert/checkpoint.hpp"
#include "icdbert/corpus.hpp"
#include "icdbert/encoder.hpp"
#include "icdbert/error.hpp"
#include "icdbert/labels.hpp"
#include "icdbert/metrics.hpp"
#include "icdbert/model.hpp"
#include "icdbert/report.hpp"
#include "icdbert/rng.hpp"
#include "icdbert/tokenizer.hpp"
#include "icdbert/trainer.hpp"

namespace icdbert {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kDatasetFile = "dataset.csv";
constexpr std::string_view kTrainCsvFile = "train.csv";
constexpr std::string_view kTestCsvFile = "test.csv";
constexpr std::string_view kLabelListFile = "labels.txt";
constexpr std::string_view kLabelTableFile = "label_table.csv";

struct FixtureArgs {
    std::string out;
    std::uint64_t seed = 7;
    std::size_t admissions = 200;
    std::size_t codes = 20;
    double zipf = 0.8;
};

struct PrepareArgs {
    std::string data = "data";
    std::string out = "prepared";
    std::size_t top_k = 10;
    double ratio = 0.8;
    std::uint64_t seed = 7;
    bool group_by_admission = false;
    bool lenient = false;
    std::string category;
    std::string diagnosis_titles;
    std::string procedure_titles;
};

struct TokenizeArgs {
    std::string prepared = "prepared";
    std::string vocab = "data/vocab.txt";
    std::string out = "tokens";
    std::size_t max_len = 64;
};

struct TrainArgs {
    std::string tokens = "tokens";
    std::string out = "run";
    std::string preset = "desk";
    std::string init;
    std::size_t epochs = 1;
    double lr = 3e-5;
    std::size_t batch_size = 16;
    std::uint64_t seed = 7;
    std::size_t eval_every = 10;
    std::size_t max_steps = 0;
    std::size_t grad_accum = 1;
    std::string schedule = "constant";
    std::size_t warmup = 0;
    double dropout = 0.1;
    double threshold = 0.5;
    std::size_t workers = 1;
    bool wall_time = false;
    bool resume = false;
};

struct EvalArgs {
    std::string run = "run";
    std::string checkpoint;
    std::string tokens = "tokens";
    std::string split = "test";
    std::string labels = "prepared/label_table.csv";
    std::string out = "eval";
    double threshold = 0.5;
    std::size_t workers = 1;
};

struct EdaArgs {
    std::string prepared = "prepared";
    std::string out = "eda";
};

class Context {
public:
    Context(const fs::path& workdir, std::ostream& out) : workdir_(workdir), out_(out) {}

    fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : workdir_ / path;
    }
    std::ostream& out() { return out_; }

private:
    fs::path workdir_;
    std::ostream& out_;
};

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

void require_file(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw IoError("missing input file " + path.string());
}

// ---------------------------------------------------------------------------

void cmd_fixture(Context& ctx, const FixtureArgs& a) {
    SyntheticCorpusOptions options;
    options.seed = a.seed;
    options.n_admissions = a.admissions;
    options.n_codes = a.codes;
    options.zipf_exponent = a.zipf;
    const auto dir = ctx.resolve(a.out);
    const auto corpus = generate_synthetic_corpus(options, dir);
    ctx.out() << fmt::format("fixture: {} notes, {} diagnosis rows, {} procedure rows -> {}\n", corpus.notes.size(),
                             corpus.diagnoses.size(), corpus.procedures.size(), dir.string());
}

std::size_t distinct_admissions(std::span<const NoteEvent> notes, std::span<const CodeRecord> a,
                                std::span<const CodeRecord> b) {
    std::set<AdmissionId> ids;
    for (const auto& n : notes) ids.insert(n.admission_id);
    for (const auto& r : a) ids.insert(r.admission_id);
    for (const auto& r : b) ids.insert(r.admission_id);
    return ids.size();
}

void cmd_prepare(Context& ctx, const PrepareArgs& a) {
    const auto data = ctx.resolve(a.data);
    for (auto name : {kNotesFile, kDiagnosesFile, kProceduresFile}) require_file(data / name);

    NoteLoadOptions note_options;
    note_options.lenient = a.lenient;
    if (!a.category.empty()) note_options.category = a.category;
    CodeLoadOptions code_options;
    code_options.lenient = a.lenient;

    auto note_stream = load_note_events(data / kNotesFile, note_options);
    auto notes = read_all(note_stream);
    auto diag_stream = load_code_records(data / kDiagnosesFile, CodeKind::diagnosis, code_options);
    auto diagnoses = read_all(diag_stream);
    auto proc_stream = load_code_records(data / kProceduresFile, CodeKind::procedure, code_options);
    auto procedures = read_all(proc_stream);

    std::vector<CodeDescriptor> descriptors;
    if (!a.diagnosis_titles.empty()) {
        auto d = load_code_descriptors(ctx.resolve(a.diagnosis_titles), CodeKind::diagnosis);
        descriptors.insert(descriptors.end(), d.begin(), d.end());
    }
    if (!a.procedure_titles.empty()) {
        auto d = load_code_descriptors(ctx.resolve(a.procedure_titles), CodeKind::procedure);
        descriptors.insert(descriptors.end(), d.begin(), d.end());
    }

    const auto vocab = build_label_vocabulary(diagnoses, procedures, a.top_k, descriptors);
    std::vector<CodeRecord> records = diagnoses;
    records.insert(records.end(), procedures.begin(), procedures.end());
    const auto label_map = one_hot_encode_admissions(records, vocab);
    const auto rows = join_notes_with_labels(notes, label_map);
    const auto split = split_train_test(rows, a.ratio, a.seed, a.group_by_admission);

    std::set<AdmissionId> labeled;
    for (const auto& r : rows) labeled.insert(r.admission_id);
    const std::size_t total = distinct_admissions(notes, diagnoses, procedures);
    const double coverage = coverage_fraction(labeled.size(), total);

    const auto out = ctx.resolve(a.out);
    make_dir(out);
    write_prepared_csv(out / kDatasetFile, rows, vocab);
    write_prepared_csv(out / kTrainCsvFile, split.train, vocab);
    write_prepared_csv(out / kTestCsvFile, split.test, vocab);
    write_label_list(out / kLabelListFile, vocab);
    write_label_table(out / kLabelTableFile, vocab);

    json per_label = json::array();
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        std::size_t n_rows = 0;
        std::set<AdmissionId> admissions;
        for (const auto& r : rows) {
            if (r.labels[i]) {
                ++n_rows;
                admissions.insert(r.admission_id);
            }
        }
        const auto& e = vocab.entries[i];
        per_label.push_back(json{{"label", e.column_name()},
                                 {"frequency", e.frequency},
                                 {"admissions", admissions.size()},
                                 {"rows", n_rows}});
    }
    auto stats = [](const LoadStats& s) {
        return json{{"data_rows", s.data_rows}, {"yielded", s.yielded}, {"skipped", s.skipped}, {"filtered", s.filtered}};
    };
    write_json(out / "prepare_report.json",
               json{{"top_k", a.top_k},
                    {"n_labels", vocab.size()},
                    {"unique_admissions", labeled.size()},
                    {"total_admissions", total},
                    {"coverage_percent", coverage},
                    {"rows", rows.size()},
                    {"train_rows", split.train.size()},
                    {"test_rows", split.test.size()},
                    {"load",
                     {{"notes", stats(note_stream.stats())},
                      {"diagnoses", stats(diag_stream.stats())},
                      {"procedures", stats(proc_stream.stats())}}},
                    {"labels", per_label}});

    ctx.out() << fmt::format("prepare: {} labels, {} unique admissions of {} ({:.2f}% coverage), {} rows "
                             "({} train / {} test) -> {}\n",
                             vocab.size(), labeled.size(), total, coverage, rows.size(), split.train.size(),
                             split.test.size(), out.string());
}

TokenizedDataset tokenize_file(const fs::path& path, const Vocabulary& vocab, std::size_t max_len,
                               std::size_t& truncated, std::size_t& unknown) {
    const auto prepared = read_prepared_csv(path);
    TokenizedDataset data;
    data.max_len = max_len;
    data.num_labels = prepared.label_columns.size();
    data.vocab_size = vocab.size();
    for (const auto& row : prepared.rows) {
        const auto pieces = tokenize_text(row.text, vocab);
        if (pieces.size() + 2 > max_len) ++truncated;
        unknown += static_cast<std::size_t>(std::count(pieces.begin(), pieces.end(), std::string(kUnkToken)));
        auto ex = encode_example(row.text, row.labels, vocab, max_len);
        ex.admission_id = row.admission_id;
        data.examples.push_back(std::move(ex));
    }
    return data;
}

void cmd_tokenize(Context& ctx, const TokenizeArgs& a) {
    const auto prepared = ctx.resolve(a.prepared);
    require_file(prepared / kTrainCsvFile);
    require_file(prepared / kTestCsvFile);
    const auto vocab = Vocabulary::load(ctx.resolve(a.vocab));
    const auto out = ctx.resolve(a.out);
    make_dir(out);
    json summary;
    for (auto [csv_name, split] : {std::pair{kTrainCsvFile, "train"}, std::pair{kTestCsvFile, "test"}}) {
        std::size_t truncated = 0, unknown = 0;
        const auto data = tokenize_file(prepared / csv_name, vocab, a.max_len, truncated, unknown);
        write_token_cache(out / fmt::format("{}.tok", split), data);
        summary[split] = json{{"examples", data.examples.size()}, {"truncated", truncated}, {"unknown_pieces", unknown}};
        ctx.out() << fmt::format("tokenize: {} {} examples, {} truncated, {} [UNK] pieces\n", data.examples.size(),
                                 split, truncated, unknown);
    }
    summary["max_len"] = a.max_len;
    summary["vocab_size"] = vocab.size();
    write_json(out / "tokenize_report.json", summary);
}

ModelConfig model_config_for(const TrainArgs& a, const TokenizedDataset& data) {
    auto config = ModelConfig::preset(a.preset, data.num_labels);
    config.dropout = a.dropout;
    config.validate();
    if (data.vocab_size > config.vocab_size) {
        throw ConfigError(fmt::format("token cache uses {} vocabulary entries but the {} preset holds {}",
                                      data.vocab_size, a.preset, config.vocab_size));
    }
    if (data.max_len > config.max_len) {
        throw ConfigError(fmt::format("token cache max_len {} exceeds the {} preset's {}", data.max_len, a.preset,
                                      config.max_len));
    }
    return config;
}

Matrix predict_probabilities(std::span<const EncodedExample> data, const ModelParameters& params, std::size_t workers) {
    Matrix probs(data.size(), params.config.num_labels);
    constexpr std::size_t kChunk = 32;
    for (std::size_t start = 0; start < data.size(); start += kChunk) {
        const auto n = std::min(kChunk, data.size() - start);
        const auto logits = predict_logits(data.subspan(start, n), params, workers);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < logits.cols; ++c) probs(start + r, c) = sigmoid(logits(r, c));
        }
    }
    return probs;
}

PredictionSet prediction_set(std::span<const EncodedExample> data, const ModelParameters& params, std::size_t workers) {
    PredictionSet set;
    set.probabilities = predict_probabilities(data, params, workers);
    set.truth = BitMatrix(data.size(), params.config.num_labels);
    for (std::size_t r = 0; r < data.size(); ++r) {
        set.admission_ids.push_back(data[r].admission_id);
        for (std::size_t c = 0; c < params.config.num_labels; ++c) set.truth(r, c) = data[r].labels[c];
    }
    return set;
}

void cmd_train(Context& ctx, const TrainArgs& a) {
    TrainingConfig tc;
    tc.learning_rate = a.lr;
    tc.epochs = a.epochs;
    tc.batch_size = a.batch_size;
    tc.seed = a.seed;
    tc.eval_every = a.eval_every;
    tc.max_steps = a.max_steps;
    tc.grad_accum = a.grad_accum;
    tc.schedule = parse_lr_schedule(a.schedule);
    tc.warmup_steps = a.warmup;
    tc.workers = a.workers;
    tc.record_wall_time = a.wall_time;
    tc.checkpoint_dir = ctx.resolve(a.out);
    tc.validate();
    if (!(a.threshold > 0.0 && a.threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
    if (a.resume && !a.init.empty()) throw ConfigError("--resume and --init are mutually exclusive");

    const auto tokens = ctx.resolve(a.tokens);
    const auto data = read_token_cache(tokens / "train.tok");
    if (data.examples.empty()) throw ConfigError("training split is empty");
    const auto config = model_config_for(a, data);

    TrainingState state;
    if (a.resume) {
        state = TrainingState::resume(load_checkpoint(tc.checkpoint_dir / kLastCheckpointFile, config));
    } else if (!a.init.empty()) {
        state = TrainingState::start(load_checkpoint(ctx.resolve(a.init), config).params, a.seed);
    } else {
        state = TrainingState::start(init_parameters(config, a.seed), a.seed);
    }

    auto result = fine_tune(std::move(state), data.examples, tc);
    const auto& s = result.state;

    const auto predictions = prediction_set(data.examples, s.params, a.workers);
    const auto bits = threshold_predictions(predictions.probabilities, a.threshold);
    const auto pooled = confusion_counts_pooled(bits, predictions.truth);
    const double micro_f1 = precision_recall_f1(pooled).f1;
    const double final_loss = s.log.empty() ? 0.0 : s.log.back().loss;

    write_json(tc.checkpoint_dir / "train_report.json",
               json{{"preset", a.preset},
                    {"parameters", parameter_count(config)},
                    {"examples", data.examples.size()},
                    {"steps", s.cursor.global_step},
                    {"epochs_completed", s.cursor.epoch},
                    {"final_loss", final_loss},
                    {"threshold", a.threshold},
                    {"train_micro_f1", micro_f1},
                    {"train_accuracy", multilabel_accuracy(bits, predictions.truth)}});
    ctx.out() << fmt::format("train: {} steps, final loss {:.6f}, train micro-F1 {:.4f} -> {}\n",
                             s.cursor.global_step, final_loss, micro_f1, tc.checkpoint_dir.string());
}

void cmd_eval(Context& ctx, const EvalArgs& a) {
    if (!(a.threshold > 0.0 && a.threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
    if (a.split != "train" && a.split != "test") throw ConfigError("split must be train or test");
    if (a.workers < 1) throw ConfigError("workers must be >= 1");
    const auto checkpoint_path =
        a.checkpoint.empty() ? ctx.resolve(a.run) / kLastCheckpointFile : ctx.resolve(a.checkpoint);
    const auto data = read_token_cache(ctx.resolve(a.tokens) / fmt::format("{}.tok", a.split));
    const auto vocab = read_label_table(ctx.resolve(a.labels));
    const auto checkpoint = load_checkpoint(checkpoint_path);
    const auto& config = checkpoint.params.config;
    if (config.num_labels != data.num_labels || vocab.size() != data.num_labels) {
        throw ConfigError(fmt::format("label width mismatch: model {}, data {}, label table {}", config.num_labels,
                                      data.num_labels, vocab.size()));
    }
    if (data.max_len > config.max_len || data.vocab_size > config.vocab_size) {
        throw ConfigError("token cache does not fit the checkpoint's model configuration");
    }
    if (data.examples.empty()) throw ConfigError(a.split + " split is empty");

    const auto predictions = prediction_set(data.examples, checkpoint.params, a.workers);
    const auto report = aggregate_report(predictions, vocab, a.threshold);
    const auto out = ctx.resolve(a.out);
    const auto written = emit_reports(report, out);

    std::ofstream pred(out / "predictions.csv", std::ios::binary | std::ios::trunc);
    if (!pred) throw IoError("cannot write " + (out / "predictions.csv").string());
    std::vector<std::string> header{"admission_id"};
    for (const auto& e : vocab.entries) header.push_back(e.column_name());
    csv::write_row(pred, header);
    for (std::size_t r = 0; r < predictions.size(); ++r) {
        std::vector<std::string> row{std::to_string(predictions.admission_ids[r])};
        for (std::size_t c = 0; c < predictions.probabilities.cols; ++c) {
            row.push_back(fmt::format("{:.17g}", predictions.probabilities(r, c)));
        }
        csv::write_row(pred, row);
    }
    if (!pred) throw IoError("write failed: " + (out / "predictions.csv").string());

    ctx.out() << fmt::format("eval: {} examples, accuracy {:.4f}, micro-F1 {:.4f}, macro-F1 {:.4f}", report.n_examples,
                             report.micro.accuracy, report.micro.f1, report.macro.f1);
    if (report.macro.auc) ctx.out() << fmt::format(", macro-AUC {:.4f}", *report.macro.auc);
    ctx.out() << fmt::format(" -> {} ({} files)\n", out.string(), written.size() + 1);
    if (!report.missing_auc.empty()) {
        ctx.out() << fmt::format("eval: AUC missing for {} single-class label(s)\n", report.missing_auc.size());
    }
}

void cmd_eda(Context& ctx, const EdaArgs& a) {
    const auto prepared = ctx.resolve(a.prepared);
    const auto dataset = read_prepared_csv(prepared / kDatasetFile);
    const auto vocab = read_label_table(prepared / kLabelTableFile);
    if (dataset.label_columns.size() != vocab.size()) {
        throw SchemaError("dataset label columns do not match the label table");
    }
    const auto rows = eda_report(dataset.rows, vocab);
    const auto out = ctx.resolve(a.out);
    emit_eda(rows, vocab, out);
    const auto empty = std::count_if(rows.begin(), rows.end(), [](const EdaRow& r) { return r.empty; });
    ctx.out() << fmt::format("eda: {} labels over {} rows, {} with no rows -> {}\n", rows.size(), dataset.rows.size(),
                             empty, out.string());
}

void write_effective_config(const CLI::App& app, const fs::path& dir) {
    make_dir(dir);
    std::ofstream out(dir / kEffectiveConfigFile, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / kEffectiveConfigFile).string());
    // The workdir is left out so the file is the same wherever the run happened.
    std::istringstream lines(app.config_to_str(true, false));
    for (std::string line; std::getline(lines, line);) {
        if (line.rfind("workdir=", 0) != 0) out << line << '\n';
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-label ICD-9 code prediction from clinical notes", "icdbert"};
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "Key=value configuration file; keys take a 'command.' prefix or [command] section");
    app.require_subcommand(1, 1);

    std::string workdir = ".";
    app.add_option("--workdir", workdir, "Base directory for every relative path");

    FixtureArgs fx;
    auto* fixture = app.add_subcommand("fixture", "Generate a synthetic MIMIC-shaped corpus");
    fixture->add_option("--out", fx.out, "Output directory")->required();
    fixture->add_option("--seed", fx.seed);
    fixture->add_option("--admissions", fx.admissions)->check(CLI::PositiveNumber);
    fixture->add_option("--codes", fx.codes)->check(CLI::PositiveNumber);
    fixture->add_option("--zipf", fx.zipf)->check(CLI::NonNegativeNumber);

    PrepareArgs pr;
    auto* prepare = app.add_subcommand("prepare", "Build the labelled dataset and train/test split");
    prepare->add_option("--data", pr.data, "Directory holding the corpus CSV files");
    prepare->add_option("--out", pr.out);
    prepare->add_option("--top-k", pr.top_k, "Most frequent codes kept per kind")->check(CLI::PositiveNumber);
    prepare->add_option("--ratio", pr.ratio, "Train fraction")->check(CLI::Range(0.0, 1.0));
    prepare->add_option("--seed", pr.seed);
    prepare->add_flag("--group-by-admission", pr.group_by_admission, "Keep every admission on one side of the split");
    prepare->add_flag("--lenient", pr.lenient, "Skip and count malformed records");
    prepare->add_option("--category", pr.category, "Only keep notes of this CATEGORY");
    prepare->add_option("--diagnosis-titles", pr.diagnosis_titles, "D_ICD_DIAGNOSES-style title file");
    prepare->add_option("--procedure-titles", pr.procedure_titles, "D_ICD_PROCEDURES-style title file");

    TokenizeArgs tk;
    auto* tokenize = app.add_subcommand("tokenize", "Encode the prepared splits into token caches");
    tokenize->add_option("--prepared", tk.prepared);
    tokenize->add_option("--vocab", tk.vocab);
    tokenize->add_option("--out", tk.out);
    tokenize->add_option("--max-len", tk.max_len)->check(CLI::Range(std::size_t{3}, std::size_t{4096}));

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Fine-tune the encoder on the training split");
    train->add_option("--tokens", tr.tokens);
    train->add_option("--out", tr.out, "Checkpoint and log directory");
    train->add_option("--preset", tr.preset)->check(CLI::IsMember({"desk", "paper"}));
    train->add_option("--init", tr.init, "Start from the weights in this checkpoint");
    train->add_option("--epochs", tr.epochs);
    train->add_option("--lr", tr.lr);
    train->add_option("--batch-size", tr.batch_size);
    train->add_option("--seed", tr.seed);
    train->add_option("--eval-every", tr.eval_every, "Log a row every N steps");
    train->add_option("--max-steps", tr.max_steps, "Stop after N optimizer steps (0: no cap)");
    train->add_option("--grad-accum", tr.grad_accum);
    train->add_option("--schedule", tr.schedule)->check(CLI::IsMember({"constant", "linear_warmup"}));
    train->add_option("--warmup", tr.warmup);
    train->add_option("--dropout", tr.dropout)->check(CLI::Range(0.0, 1.0));
    train->add_option("--threshold", tr.threshold);
    train->add_option("--workers", tr.workers);
    train->add_flag("--wall-time", tr.wall_time, "Record wall-clock milliseconds in the log");
    train->add_flag("--resume", tr.resume, "Continue from last.ckpt in the output directory");

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint and write reports");
    eval->add_option("--run", ev.run);
    eval->add_option("--checkpoint", ev.checkpoint, "Defaults to <run>/last.ckpt");
    eval->add_option("--tokens", ev.tokens);
    eval->add_option("--split", ev.split)->check(CLI::IsMember({"train", "test"}));
    eval->add_option("--labels", ev.labels);
    eval->add_option("--out", ev.out);
    eval->add_option("--threshold", ev.threshold);
    eval->add_option("--workers", ev.workers);

    EdaArgs ed;
    auto* eda = app.add_subcommand("eda", "Per-label note counts and word counts");
    eda->add_option("--prepared", ed.prepared);
    eda->add_option("--out", ed.out);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return kExitUsage;
    }

    try {
        Context ctx(workdir, out);
        if (fixture->parsed()) {
            cmd_fixture(ctx, fx);
            write_effective_config(app, ctx.resolve(fx.out));
        } else if (prepare->parsed()) {
            cmd_prepare(ctx, pr);
            write_effective_config(app, ctx.resolve(pr.out));
        } else if (tokenize->parsed()) {
            cmd_tokenize(ctx, tk);
            write_effective_config(app, ctx.resolve(tk.out));
        } else if (train->parsed()) {
            cmd_train(ctx, tr);
            write_effective_config(app, ctx.resolve(tr.out));
        } else if (eval->parsed()) {
            cmd_eval(ctx, ev);
            write_effective_config(app, ctx.resolve(ev.out));
        } else if (eda->parsed()) {
            cmd_eda(ctx, ed);
            write_effective_config(app, ctx.resolve(ed.out));
        }
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int run_cli(const std::vector<std::string>& args) { return run_cli(args, std::cout, std::cerr); }

}  // namespace icdbert
