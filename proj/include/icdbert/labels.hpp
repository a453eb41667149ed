// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "icdbert/corpus.hpp"

namespace icdbert {

using LabelVector = std::vector<std::uint8_t>;

struct RankedCode {
    std::string code;
    std::size_t frequency = 0;  ///< distinct admissions carrying the code

    friend bool operator==(const RankedCode&, const RankedCode&) = default;
};

struct LabelEntry {
    std::string code;
    CodeKind kind = CodeKind::diagnosis;
    std::string short_title;
    std::size_t frequency = 0;

    /// Column name used in the prepared dataset, e.g. "diagnosis_401.9".
    std::string column_name() const;
};

/// Ordered label set: top-k diagnoses followed by top-k procedures.
struct LabelVocabulary {
    std::vector<LabelEntry> entries;
    std::size_t k = 0;

    std::size_t size() const { return entries.size(); }
    std::optional<std::size_t> index_of(const std::string& code, CodeKind kind) const;
};

struct LabeledNote {
    AdmissionId admission_id = 0;
    std::string text;
    LabelVector labels;

    friend bool operator==(const LabeledNote&, const LabeledNote&) = default;
};

struct DatasetSplit {
    std::vector<LabeledNote> train;
    std::vector<LabeledNote> test;
    std::uint64_t seed = 0;
    double ratio = 0.8;
};

/// Top-k codes of `kind` by number of distinct admissions, ties broken by ascending code.
/// Records of the other kind are ignored.
std::vector<RankedCode> rank_codes_by_frequency(std::span<const CodeRecord> records, std::size_t k, CodeKind kind);

LabelVocabulary build_label_vocabulary(std::span<const CodeRecord> diagnoses, std::span<const CodeRecord> procedures,
                                       std::size_t k, std::span<const CodeDescriptor> descriptors = {});

/// Admission -> label bits. Admissions with no vocabulary code are left out (inner join).
std::map<AdmissionId, LabelVector> one_hot_encode_admissions(std::span<const CodeRecord> records,
                                                             const LabelVocabulary& vocab);

std::vector<LabeledNote> join_notes_with_labels(std::span<const NoteEvent> notes,
                                                const std::map<AdmissionId, LabelVector>& label_map);

/// Percentage 100 * labeled / total, rounded half-up to two decimals.
double coverage_fraction(std::size_t n_labeled_admissions, std::size_t n_total_admissions);

/// Seeded shuffle, then the first floor(ratio * n) rows go to train. With `group_by_admission`
/// whole admissions are assigned in shuffled order until train holds at least floor(ratio * n)
/// rows, so no admission spans both sides.
DatasetSplit split_train_test(std::span<const LabeledNote> rows, double ratio, std::uint64_t seed,
                              bool group_by_admission = false);

struct EdaRow {
    std::size_t note_count = 0;
    double mean_word_count = 0.0;
    bool empty = false;  ///< no row carries this label; the mean is reported as 0
};

std::vector<EdaRow> eda_report(std::span<const LabeledNote> rows, const LabelVocabulary& vocab);

/// CSV: label, kind, code, short_title, note_count, mean_word_count, empty
void write_eda_csv(const std::filesystem::path& path, std::span<const EdaRow> rows, const LabelVocabulary& vocab);

// ---------------------------------------------------------------------------
// Prepared dataset files

/// admission_id, text, then one 0/1 column per label named `<kind>_<code>`.
void write_prepared_csv(const std::filesystem::path& path, std::span<const LabeledNote> rows,
                        const LabelVocabulary& vocab);

struct PreparedDataset {
    std::vector<std::string> label_columns;
    std::vector<LabeledNote> rows;
};

PreparedDataset read_prepared_csv(const std::filesystem::path& path);

/// Sidecar label list, one column name per line.
void write_label_list(const std::filesystem::path& path, const LabelVocabulary& vocab);
std::vector<std::string> read_label_list(const std::filesystem::path& path);

/// Full vocabulary table: index, kind, code, short_title, frequency.
void write_label_table(const std::filesystem::path& path, const LabelVocabulary& vocab);
LabelVocabulary read_label_table(const std::filesystem::path& path);

}  // namespace icdbert
