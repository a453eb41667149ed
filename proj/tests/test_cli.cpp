// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "icdbert/checkpoint.hpp"
#include "icdbert/cli.hpp"
#include "icdbert/corpus.hpp"
#include "icdbert/labels.hpp"
#include "icdbert/trainer.hpp"
#include "test_support.hpp"

namespace icdbert {
namespace {

namespace fs = std::filesystem;
using testing::read_bytes;
using testing::TempDir;
using testing::write_text;

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

Outcome run(const fs::path& workdir, std::vector<std::string> args) {
    args.insert(args.begin(), {"--workdir", workdir.string()});
    std::ostringstream out, err;
    Outcome o;
    o.code = run_cli(args, out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(read_bytes(path)); }

std::size_t csv_columns(const fs::path& path) {
    const auto text = read_bytes(path);
    const auto header = text.substr(0, text.find('\n'));
    return static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
}

std::size_t line_count(const fs::path& path) {
    const auto text = read_bytes(path);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

/// A small corpus prepared and tokenized once for the whole suite.
class Pipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new TempDir("cli");
        ASSERT_EQ(run(dir(), {"fixture", "--out", "data", "--admissions", "60"}).code, 0);
        ASSERT_EQ(run(dir(), {"prepare", "--top-k", "5"}).code, 0);
        ASSERT_EQ(run(dir(), {"tokenize", "--max-len", "48"}).code, 0);
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }
    static const fs::path& dir() { return dir_->path(); }
    static TempDir* dir_;
};
TempDir* Pipeline::dir_ = nullptr;

TEST(Cli, UsageErrorsExitTwo) {
    TempDir dir("cli");
    auto o = run(dir.path(), {"fixture", "--seed", "7"});
    EXPECT_EQ(o.code, kExitUsage);
    EXPECT_NE(o.err.find("--out"), std::string::npos) << o.err;
    EXPECT_NE(o.err.find("Usage"), std::string::npos) << o.err;
    EXPECT_EQ(run(dir.path(), {}).code, kExitUsage);
    EXPECT_EQ(run(dir.path(), {"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(run(dir.path(), {"train", "--preset", "huge"}).code, kExitUsage);
    EXPECT_EQ(run(dir.path(), {"prepare", "--top-k", "0"}).code, kExitUsage);
    EXPECT_EQ(run(dir.path(), {"train", "--epochs", "many"}).code, kExitUsage);
    EXPECT_EQ(run(dir.path(), {"--help"}).code, kExitOk);
}

TEST(Cli, RuntimeErrorsExitOne) {
    TempDir dir("cli");
    auto o = run(dir.path(), {"prepare", "--data", "nowhere"});
    EXPECT_EQ(o.code, kExitRuntime);
    EXPECT_NE(o.err.find("NOTEEVENTS.csv"), std::string::npos) << o.err;
    EXPECT_EQ(run(dir.path(), {"train", "--tokens", "nowhere"}).code, kExitRuntime);
    EXPECT_EQ(run(dir.path(), {"eval"}).code, kExitRuntime);
}

TEST(Cli, FixtureInventoryAndDeterminism) {
    TempDir dir("cli");
    ASSERT_EQ(run(dir.path(), {"fixture", "--seed", "7", "--admissions", "200", "--codes", "40", "--out", "a"}).code, 0);
    ASSERT_EQ(run(dir.path(), {"fixture", "--seed", "7", "--admissions", "200", "--codes", "40", "--out", "b"}).code, 0);
    for (auto name : {kNotesFile, kDiagnosesFile, kProceduresFile, kManifestFile, kFixtureVocabFile}) {
        const auto file = std::string(name);
        ASSERT_TRUE(fs::exists(dir / "a" / file)) << file;
        EXPECT_EQ(read_bytes(dir / "a" / file), read_bytes(dir / "b" / file)) << file;
    }
    const auto manifest = read_bytes(dir / "a" / std::string(kManifestFile));
    EXPECT_NE(manifest.find("n_codes=40"), std::string::npos) << manifest;
}

TEST(Cli, TopKSetsLabelWidth) {
    TempDir dir("cli");
    ASSERT_EQ(run(dir.path(), {"fixture", "--out", "data", "--admissions", "400", "--codes", "60"}).code, 0);
    for (auto [k, width] : {std::pair{"10", 20u}, std::pair{"50", 100u}}) {
        const std::string out = std::string("p") + k;
        ASSERT_EQ(run(dir.path(), {"prepare", "--top-k", k, "--out", out}).code, 0);
        EXPECT_EQ(line_count(dir / out / "labels.txt"), width);
        EXPECT_EQ(csv_columns(dir / out / "dataset.csv"), 2 + width);
        EXPECT_EQ(csv_columns(dir / out / "train.csv"), 2 + width);
        EXPECT_EQ(read_json(dir / out / "prepare_report.json")["n_labels"], width);
    }
}

TEST(Cli, CoverageMatchesHandRecount) {
    TempDir dir("cli");
    ASSERT_EQ(run(dir.path(), {"fixture", "--out", "data", "--admissions", "150", "--codes", "30"}).code, 0);
    const auto o = run(dir.path(), {"prepare", "--top-k", "3"});
    ASSERT_EQ(o.code, 0) << o.err;
    const auto report = read_json(dir / "prepared" / "prepare_report.json");

    auto notes_stream = load_note_events(dir / "data" / std::string(kNotesFile));
    const auto notes = read_all(notes_stream);
    auto d = load_code_records(dir / "data" / std::string(kDiagnosesFile), CodeKind::diagnosis);
    const auto diag = read_all(d);
    auto p = load_code_records(dir / "data" / std::string(kProceduresFile), CodeKind::procedure);
    const auto proc = read_all(p);
    std::set<AdmissionId> all, with_notes;
    for (const auto& n : notes) {
        all.insert(n.admission_id);
        with_notes.insert(n.admission_id);
    }
    for (const auto& r : diag) all.insert(r.admission_id);
    for (const auto& r : proc) all.insert(r.admission_id);
    const auto table = read_label_table(dir / "prepared" / "label_table.csv");
    std::set<AdmissionId> labeled;
    for (const auto* records : {&diag, &proc}) {
        for (const auto& r : *records) {
            if (table.index_of(r.code, r.kind) && with_notes.count(r.admission_id)) labeled.insert(r.admission_id);
        }
    }
    const double expected =
        std::floor(10000.0 * static_cast<double>(labeled.size()) / static_cast<double>(all.size()) + 0.5) / 100.0;
    EXPECT_EQ(report["unique_admissions"], labeled.size());
    EXPECT_EQ(report["total_admissions"], all.size());
    EXPECT_NEAR(report["coverage_percent"].get<double>(), expected, 1e-9);
    char printed[32];
    std::snprintf(printed, sizeof printed, "(%.2f%% coverage)", expected);
    EXPECT_NE(o.out.find(printed), std::string::npos) << o.out;
}

TEST(Cli, EdaFlagsLabelWithoutNotes) {
    TempDir dir("cli");
    fs::create_directories(dir / "data");
    write_text(dir / "data" / "NOTEEVENTS.csv",
               "ROW_ID,SUBJECT_ID,HADM_ID,CATEGORY,TEXT\n1,1,10,Nursing,one two three\n2,1,10,Nursing,four five\n");
    write_text(dir / "data" / "DIAGNOSES_ICD.csv",
               "ROW_ID,SUBJECT_ID,HADM_ID,SEQ_NUM,ICD9_CODE\n1,1,10,1,401.9\n2,2,20,1,428.0\n");
    write_text(dir / "data" / "PROCEDURES_ICD.csv", "ROW_ID,SUBJECT_ID,HADM_ID,SEQ_NUM,ICD9_CODE\n1,1,10,1,38.93\n");
    ASSERT_EQ(run(dir.path(), {"prepare", "--top-k", "2"}).code, 0);
    const auto o = run(dir.path(), {"eda"});
    ASSERT_EQ(o.code, 0) << o.err;
    EXPECT_NE(o.out.find("1 with no rows"), std::string::npos) << o.out;
    const auto eda = read_bytes(dir / "eda" / "eda.csv");
    EXPECT_NE(eda.find("401.9"), std::string::npos);
    EXPECT_NE(eda.find("401.9,401.9,2,2.5000,0"), std::string::npos) << eda;
    EXPECT_NE(eda.find("428.0,428.0,0,0.0000,1"), std::string::npos) << eda;
    EXPECT_TRUE(fs::exists(dir / "eda" / "eda_note_counts.svg"));
    EXPECT_TRUE(fs::exists(dir / "eda" / "eda_word_counts.svg"));
}

TEST_F(Pipeline, EffectiveConfigReproducesRun) {
    ASSERT_EQ(run(dir(), {"prepare", "--top-k", "4", "--ratio", "0.7", "--seed", "3", "--out", "echo1"}).code, 0);
    const auto config = (dir() / "echo1" / std::string(kEffectiveConfigFile)).string();
    EXPECT_EQ(read_bytes(config).find("workdir"), std::string::npos);
    const auto o = run(dir(), {"--config", config, "prepare", "--out", "echo2"});
    ASSERT_EQ(o.code, 0) << o.err;
    for (auto name : {"dataset.csv", "train.csv", "test.csv", "labels.txt", "label_table.csv", "prepare_report.json"}) {
        EXPECT_EQ(read_bytes(dir() / "echo1" / name), read_bytes(dir() / "echo2" / name)) << name;
    }
    EXPECT_EQ(read_json(dir() / "echo2" / "prepare_report.json")["n_labels"], 8);

    write_text(dir() / "hand.ini", "[prepare]\ntop-k=2\nout=\"echo3\"\n");
    ASSERT_EQ(run(dir(), {"--config", (dir() / "hand.ini").string(), "prepare"}).code, 0);
    EXPECT_EQ(line_count(dir() / "echo3" / "labels.txt"), 4u);
}

TEST_F(Pipeline, ZeroLearningRateKeepsLossFixed) {
    const auto o = run(dir(), {"train", "--out", "frozen", "--lr", "0", "--dropout", "0", "--batch-size", "1000",
                               "--epochs", "4", "--eval-every", "1"});
    ASSERT_EQ(o.code, 0) << o.err;
    const auto log = read_training_log(dir() / "frozen" / std::string(kTrainLogFile));
    ASSERT_EQ(log.size(), 4u);
    for (const auto& row : log) EXPECT_NEAR(row.loss, log.front().loss, 1e-12);
    const auto a = load_checkpoint(dir() / "frozen" / epoch_checkpoint_name(1));
    const auto b = load_checkpoint(dir() / "frozen" / epoch_checkpoint_name(4));
    EXPECT_EQ(tensor_list(a.params)[0]->values, tensor_list(b.params)[0]->values);
}

TEST_F(Pipeline, InterruptedRunResumesToSameCheckpoint) {
    const std::vector<std::string> common{"--lr", "3e-3", "--batch-size", "16", "--epochs", "2", "--eval-every", "3"};
    auto with = [&](std::vector<std::string> extra) {
        std::vector<std::string> args{"train"};
        args.insert(args.end(), common.begin(), common.end());
        args.insert(args.end(), extra.begin(), extra.end());
        return run(dir(), args);
    };
    ASSERT_EQ(with({"--out", "full"}).code, 0);
    ASSERT_EQ(with({"--out", "part", "--max-steps", "4"}).code, 0);
    const auto partial = load_checkpoint(dir() / "part" / std::string(kLastCheckpointFile));
    EXPECT_EQ(partial.cursor.global_step, 4u);
    const auto o = with({"--out", "part", "--resume"});
    ASSERT_EQ(o.code, 0) << o.err;
    EXPECT_EQ(read_bytes(dir() / "full" / std::string(kLastCheckpointFile)),
              read_bytes(dir() / "part" / std::string(kLastCheckpointFile)));
    EXPECT_EQ(read_bytes(dir() / "full" / epoch_checkpoint_name(2)), read_bytes(dir() / "part" / epoch_checkpoint_name(2)));
}

TEST_F(Pipeline, ShapeMismatchNamesTensor) {
    ASSERT_EQ(run(dir(), {"train", "--out", "small", "--max-steps", "1"}).code, 0);
    const auto o = run(dir(), {"train", "--out", "big", "--preset", "paper", "--init", "small/last.ckpt"});
    EXPECT_EQ(o.code, kExitRuntime);
    EXPECT_NE(o.err.find("shape mismatch for tensor embeddings.token"), std::string::npos) << o.err;
}

TEST_F(Pipeline, EvalReportsAndThresholdMonotonicity) {
    ASSERT_EQ(run(dir(), {"train", "--out", "model", "--lr", "3e-3", "--batch-size", "16", "--epochs", "3"}).code, 0);
    ASSERT_EQ(run(dir(), {"eval", "--run", "model", "--out", "e5"}).code, 0);
    ASSERT_EQ(run(dir(), {"eval", "--run", "model", "--out", "e9", "--threshold", "0.9"}).code, 0);
    EXPECT_EQ(line_count(dir() / "e5" / "metrics.csv"), 1u + 10u + 2u);
    EXPECT_TRUE(fs::exists(dir() / "e5" / "roc.svg"));
    EXPECT_TRUE(fs::exists(dir() / "e5" / "predictions.csv"));
    const auto low = read_json(dir() / "e5" / "metrics.json");
    const auto high = read_json(dir() / "e9" / "metrics.json");
    ASSERT_EQ(low["labels"].size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_LE(high["labels"][i]["recall"].get<double>(), low["labels"][i]["recall"].get<double>()) << i;
    }
    ASSERT_EQ(run(dir(), {"eval", "--run", "model", "--out", "e5b"}).code, 0);
    for (auto name : {"metrics.csv", "metrics.json", "roc.svg", "predictions.csv"}) {
        EXPECT_EQ(read_bytes(dir() / "e5" / name), read_bytes(dir() / "e5b" / name)) << name;
    }
}

TEST(Cli, OverfitsThirtyTwoExampleFixture) {
    TempDir dir("cli");
    ASSERT_EQ(run(dir.path(), {"fixture", "--out", "data", "--admissions", "20"}).code, 0);
    ASSERT_EQ(run(dir.path(), {"prepare", "--top-k", "5"}).code, 0);
    ASSERT_EQ(run(dir.path(), {"tokenize", "--max-len", "48"}).code, 0);
    const auto o = run(dir.path(), {"train", "--lr", "3e-3", "--dropout", "0", "--batch-size", "32", "--max-steps",
                                    "200", "--epochs", "200", "--eval-every", "50"});
    ASSERT_EQ(o.code, 0) << o.err;
    const auto report = read_json(dir / "run" / "train_report.json");
    EXPECT_EQ(report["steps"], 200);
    EXPECT_LE(report["examples"].get<int>(), 40);
    EXPECT_GE(report["train_micro_f1"].get<double>(), 0.99);
    EXPECT_NE(o.out.find("train micro-F1"), std::string::npos);
}

}  // namespace
}  // namespace icdbert
