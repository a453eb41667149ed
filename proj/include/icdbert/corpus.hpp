// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "icdbert/csv.hpp"

namespace icdbert {

using AdmissionId = std::int64_t;

enum class CodeKind { diagnosis, procedure };

std::string_view to_string(CodeKind kind);
CodeKind parse_code_kind(std::string_view text);

struct NoteEvent {
    AdmissionId admission_id = 0;
    std::int64_t subject_id = 0;
    std::string category;
    std::string text;

    friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

struct CodeRecord {
    AdmissionId admission_id = 0;
    std::string code;
    CodeKind kind = CodeKind::diagnosis;
    std::int64_t seq_num = 0;

    friend bool operator==(const CodeRecord&, const CodeRecord&) = default;
};

struct CodeDescriptor {
    std::string code;
    CodeKind kind = CodeKind::diagnosis;
    std::string short_title;
};

// Column names default to the MIMIC-III v1.4 headers.
struct NoteColumns {
    std::string admission_id = "HADM_ID";
    std::string subject_id = "SUBJECT_ID";
    std::string category = "CATEGORY";
    std::string text = "TEXT";
};

struct CodeColumns {
    std::string admission_id = "HADM_ID";
    std::string code = "ICD9_CODE";
    std::string seq_num = "SEQ_NUM";
};

struct DescriptorColumns {
    std::string code = "ICD9_CODE";
    std::string short_title = "SHORT_TITLE";
};

struct LoadOptions {
    /// Skip and count malformed records instead of failing on the first one.
    bool lenient = false;
    /// Stop after this many records have been yielded.
    std::optional<std::size_t> limit;
};

struct NoteLoadOptions : LoadOptions {
    NoteColumns columns;
    /// When set, only notes whose CATEGORY matches exactly are yielded.
    std::optional<std::string> category;
};

struct CodeLoadOptions : LoadOptions {
    CodeColumns columns;
};

struct LoadStats {
    std::size_t data_rows = 0;        ///< data rows consumed, header excluded
    std::size_t yielded = 0;
    std::size_t skipped = 0;          ///< malformed or null-key rows dropped under lenient mode
    std::size_t filtered = 0;         ///< well-formed rows dropped by the category filter
};

/// CSV file with a header row, resolved into required column positions.
class TableReader {
public:
    TableReader(const std::filesystem::path& path, const std::vector<std::string>& required);

    /// Next data row; false at end of file. Field-count mismatches raise RecordError.
    bool next(std::vector<std::string>& row);
    std::size_t column(std::size_t required_index) const { return positions_[required_index]; }
    std::size_t record_line() const { return reader_->record_line(); }

private:
    std::ifstream in_;
    std::unique_ptr<csv::Reader> reader_;
    std::vector<std::size_t> positions_;
    std::size_t width_ = 0;
};

/// Single-consumer stream of NoteEvents in file order.
class NoteEventStream {
public:
    NoteEventStream(const std::filesystem::path& path, NoteLoadOptions options);

    std::optional<NoteEvent> next();
    const LoadStats& stats() const { return stats_; }

private:
    TableReader table_;
    NoteLoadOptions options_;
    LoadStats stats_;
    std::vector<std::string> row_;
};

class CodeRecordStream {
public:
    CodeRecordStream(const std::filesystem::path& path, CodeKind kind, CodeLoadOptions options);

    std::optional<CodeRecord> next();
    const LoadStats& stats() const { return stats_; }

private:
    TableReader table_;
    CodeKind kind_;
    CodeLoadOptions options_;
    LoadStats stats_;
    std::vector<std::string> row_;
};

NoteEventStream load_note_events(const std::filesystem::path& path, NoteLoadOptions options = {});
CodeRecordStream load_code_records(const std::filesystem::path& path, CodeKind kind,
                                   CodeLoadOptions options = {});

/// Drains a stream into a vector; stats stay readable on the stream.
std::vector<NoteEvent> read_all(NoteEventStream& stream);
std::vector<CodeRecord> read_all(CodeRecordStream& stream);

/// D_ICD_DIAGNOSES / D_ICD_PROCEDURES-shaped descriptor tables.
std::vector<CodeDescriptor> load_code_descriptors(const std::filesystem::path& path, CodeKind kind,
                                                  const DescriptorColumns& columns = {});

// ---------------------------------------------------------------------------
// Synthetic MIMIC-shaped corpus

struct SyntheticCorpusOptions {
    std::uint64_t seed = 7;
    std::size_t n_admissions = 200;
    /// Distinct codes per kind.
    std::size_t n_codes = 20;
    double zipf_exponent = 0.8;
};

struct SyntheticCorpus {
    std::vector<NoteEvent> notes;
    std::vector<CodeRecord> diagnoses;
    std::vector<CodeRecord> procedures;
    /// Marker word embedded in every note of an admission carrying the code.
    std::vector<CodeDescriptor> codes;
    std::vector<std::string> keywords;
};

inline constexpr std::string_view kNotesFile = "NOTEEVENTS.csv";
inline constexpr std::string_view kDiagnosesFile = "DIAGNOSES_ICD.csv";
inline constexpr std::string_view kProceduresFile = "PROCEDURES_ICD.csv";
inline constexpr std::string_view kFixtureVocabFile = "vocab.txt";
inline constexpr std::string_view kManifestFile = "manifest.txt";

SyntheticCorpus synthesize_corpus(const SyntheticCorpusOptions& options);

/// WordPiece vocabulary that covers the synthetic corpus: special tokens, punctuation,
/// digits with continuation pieces, filler words, and one keyword per code.
std::vector<std::string> synthetic_vocabulary(const SyntheticCorpus& corpus);

/// Writes NOTEEVENTS.csv, DIAGNOSES_ICD.csv, PROCEDURES_ICD.csv, vocab.txt and manifest.txt
/// into `out_dir`, creating it if needed. Output is byte-identical for identical options.
SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusOptions& options,
                                          const std::filesystem::path& out_dir);

}  // namespace icdbert
