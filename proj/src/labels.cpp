// SPDX-License-Identifier: Apache-2.0
#include "icdbert/labels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "icdbert/csv.hpp"
#include "icdbert/error.hpp"
#include "icdbert/rng.hpp"

namespace icdbert {

namespace {

std::size_t whitespace_word_count(std::string_view text) {
    std::size_t count = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
        if (!space && !in_word) ++count;
        in_word = !space;
    }
    return count;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

}  // namespace

std::string LabelEntry::column_name() const { return std::string(to_string(kind)) + "_" + code; }

std::optional<std::size_t> LabelVocabulary::index_of(const std::string& code, CodeKind kind) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].kind == kind && entries[i].code == code) return i;
    }
    return std::nullopt;
}

std::vector<RankedCode> rank_codes_by_frequency(std::span<const CodeRecord> records, std::size_t k, CodeKind kind) {
    if (k < 1) throw ConfigError("k must be >= 1");
    std::set<std::pair<std::string, AdmissionId>> pairs;
    for (const auto& r : records) {
        if (r.kind == kind) pairs.emplace(r.code, r.admission_id);
    }
    std::vector<RankedCode> ranked;
    for (const auto& [code, admission] : pairs) {
        if (ranked.empty() || ranked.back().code != code) ranked.push_back({code, 0});
        ++ranked.back().frequency;
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const RankedCode& a, const RankedCode& b) {
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        return a.code < b.code;
    });
    if (ranked.size() > k) ranked.resize(k);
    return ranked;
}

LabelVocabulary build_label_vocabulary(std::span<const CodeRecord> diagnoses, std::span<const CodeRecord> procedures,
                                       std::size_t k, std::span<const CodeDescriptor> descriptors) {
    LabelVocabulary vocab;
    vocab.k = k;
    auto title_for = [&](const std::string& code, CodeKind kind) {
        for (const auto& d : descriptors) {
            if (d.kind == kind && d.code == code) return d.short_title;
        }
        return code;
    };
    for (auto [records, kind] : {std::pair{diagnoses, CodeKind::diagnosis}, std::pair{procedures, CodeKind::procedure}}) {
        for (auto& ranked : rank_codes_by_frequency(records, k, kind)) {
            vocab.entries.push_back({ranked.code, kind, title_for(ranked.code, kind), ranked.frequency});
        }
    }
    return vocab;
}

std::map<AdmissionId, LabelVector> one_hot_encode_admissions(std::span<const CodeRecord> records,
                                                             const LabelVocabulary& vocab) {
    if (vocab.size() == 0) throw ConfigError("label vocabulary is empty");
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < vocab.entries.size(); ++i) {
        index.emplace(vocab.entries[i].column_name(), i);
    }
    std::map<AdmissionId, LabelVector> out;
    for (const auto& r : records) {
        const auto it = index.find(std::string(to_string(r.kind)) + "_" + r.code);
        if (it == index.end()) continue;
        auto& bits = out[r.admission_id];
        if (bits.empty()) bits.assign(vocab.size(), 0);
        bits[it->second] = 1;
    }
    return out;
}

std::vector<LabeledNote> join_notes_with_labels(std::span<const NoteEvent> notes,
                                                const std::map<AdmissionId, LabelVector>& label_map) {
    std::vector<LabeledNote> out;
    for (const auto& note : notes) {
        const auto it = label_map.find(note.admission_id);
        if (it == label_map.end()) continue;
        out.push_back({note.admission_id, note.text, it->second});
    }
    return out;
}

double coverage_fraction(std::size_t n_labeled_admissions, std::size_t n_total_admissions) {
    if (n_total_admissions == 0) throw RangeError("coverage_fraction: total admissions is zero");
    if (n_labeled_admissions > n_total_admissions) {
        throw RangeError("coverage_fraction: labeled admissions exceed total");
    }
    // Integer arithmetic in hundredths of a percent keeps half-up rounding exact.
    const auto num = static_cast<unsigned long long>(n_labeled_admissions) * 20000ULL;
    const auto den = static_cast<unsigned long long>(n_total_admissions) * 2ULL;
    const auto hundredths = (num + n_total_admissions) / den;
    return static_cast<double>(hundredths) / 100.0;
}

DatasetSplit split_train_test(std::span<const LabeledNote> rows, double ratio, std::uint64_t seed,
                              bool group_by_admission) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
    DatasetSplit split;
    split.seed = seed;
    split.ratio = ratio;
    const std::size_t n = rows.size();
    if (n == 0) return split;
    // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
    const auto target = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
    Rng rng(derive_seed(seed, "train-test-split"));

    if (!group_by_admission) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order.begin(), order.end());
        for (std::size_t i = 0; i < n; ++i) {
            (i < target ? split.train : split.test).push_back(rows[order[i]]);
        }
        return split;
    }

    std::vector<AdmissionId> admissions;
    std::map<AdmissionId, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) {
        auto& m = members[rows[i].admission_id];
        if (m.empty()) admissions.push_back(rows[i].admission_id);
        m.push_back(i);
    }
    rng.shuffle(admissions.begin(), admissions.end());
    for (auto id : admissions) {
        auto& side = split.train.size() < target ? split.train : split.test;
        for (auto i : members[id]) side.push_back(rows[i]);
    }
    return split;
}

std::vector<EdaRow> eda_report(std::span<const LabeledNote> rows, const LabelVocabulary& vocab) {
    std::vector<EdaRow> out(vocab.size());
    std::vector<std::size_t> word_totals(vocab.size(), 0);
    for (const auto& row : rows) {
        if (row.labels.size() != vocab.size()) throw SchemaError("label vector width does not match vocabulary");
        const auto words = whitespace_word_count(row.text);
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            if (!row.labels[i]) continue;
            ++out[i].note_count;
            word_totals[i] += words;
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i].note_count == 0) {
            out[i].empty = true;
        } else {
            out[i].mean_word_count = static_cast<double>(word_totals[i]) / static_cast<double>(out[i].note_count);
        }
    }
    return out;
}

void write_eda_csv(const std::filesystem::path& path, std::span<const EdaRow> rows, const LabelVocabulary& vocab) {
    auto out = open_for_write(path);
    csv::write_row(out, {"label", "kind", "code", "short_title", "note_count", "mean_word_count", "empty"});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& e = vocab.entries[i];
        csv::write_row(out, {e.column_name(), std::string(to_string(e.kind)), e.code, e.short_title,
                             std::to_string(rows[i].note_count), fmt::format("{:.4f}", rows[i].mean_word_count),
                             rows[i].empty ? "1" : "0"});
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void write_prepared_csv(const std::filesystem::path& path, std::span<const LabeledNote> rows,
                        const LabelVocabulary& vocab) {
    auto out = open_for_write(path);
    std::vector<std::string> fields{"admission_id", "text"};
    for (const auto& e : vocab.entries) fields.push_back(e.column_name());
    csv::write_row(out, fields);
    for (const auto& row : rows) {
        if (row.labels.size() != vocab.size()) throw SchemaError("label vector width does not match vocabulary");
        fields.clear();
        fields.push_back(std::to_string(row.admission_id));
        fields.push_back(row.text);
        for (auto bit : row.labels) fields.emplace_back(bit ? "1" : "0");
        csv::write_row(out, fields);
    }
    if (!out) throw IoError("write failed: " + path.string());
}

PreparedDataset read_prepared_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    csv::Reader reader(in);
    std::vector<std::string> fields;
    if (!reader.next(fields) || fields.size() < 3 || fields[0] != "admission_id" || fields[1] != "text") {
        throw SchemaError(path.string() + ": expected header admission_id,text,<labels...>");
    }
    PreparedDataset data;
    data.label_columns.assign(fields.begin() + 2, fields.end());
    const auto width = fields.size();
    while (reader.next(fields)) {
        if (fields.size() != width) throw RecordError(reader.record_line(), "field count mismatch");
        LabeledNote row;
        try {
            row.admission_id = std::stoll(fields[0]);
        } catch (const std::exception&) {
            throw RecordError(reader.record_line(), "bad admission_id");
        }
        row.text = std::move(fields[1]);
        row.labels.reserve(width - 2);
        for (std::size_t i = 2; i < width; ++i) {
            if (fields[i] != "0" && fields[i] != "1") throw RecordError(reader.record_line(), "label cell not 0/1");
            row.labels.push_back(fields[i] == "1" ? 1 : 0);
        }
        data.rows.push_back(std::move(row));
    }
    return data;
}

void write_label_list(const std::filesystem::path& path, const LabelVocabulary& vocab) {
    auto out = open_for_write(path);
    for (const auto& e : vocab.entries) out << e.column_name() << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::string> read_label_list(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

void write_label_table(const std::filesystem::path& path, const LabelVocabulary& vocab) {
    auto out = open_for_write(path);
    out << "# k=" << vocab.k << '\n';
    csv::write_row(out, {"index", "kind", "code", "short_title", "frequency"});
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        const auto& e = vocab.entries[i];
        csv::write_row(out, {std::to_string(i), std::string(to_string(e.kind)), e.code, e.short_title,
                             std::to_string(e.frequency)});
    }
    if (!out) throw IoError("write failed: " + path.string());
}

LabelVocabulary read_label_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    LabelVocabulary vocab;
    std::string first;
    std::getline(in, first);
    if (first.rfind("# k=", 0) != 0) throw SchemaError(path.string() + ": missing '# k=' line");
    vocab.k = std::stoull(first.substr(4));
    csv::Reader reader(in);
    std::vector<std::string> fields;
    if (!reader.next(fields) || fields.size() != 5 || fields[0] != "index") {
        throw SchemaError(path.string() + ": bad label table header");
    }
    while (reader.next(fields)) {
        if (fields.size() != 5) throw RecordError(reader.record_line() + 1, "field count mismatch");
        vocab.entries.push_back({fields[2], parse_code_kind(fields[1]), fields[3], std::stoull(fields[4])});
    }
    return vocab;
}

}  // namespace icdbert
