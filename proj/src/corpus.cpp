// SPDX-License-Identifier: Apache-2.0
#include "icdbert/corpus.hpp"

#include <algorithm>
#include <charconv>

#include "icdbert/error.hpp"

namespace icdbert {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n\f\v");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n\f\v");
    return s.substr(first, last - first + 1);
}

std::optional<std::int64_t> parse_int(std::string_view text) {
    text = trim(text);
    if (text.empty()) return std::nullopt;
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

std::int64_t require_positive(std::string_view text, std::string_view column, std::size_t line) {
    const auto value = parse_int(text);
    if (!value) {
        throw RecordError(line, std::string(column) + " is not an integer: '" + std::string(text) + "'");
    }
    if (*value <= 0) {
        throw RecordError(line, std::string(column) + " must be positive");
    }
    return *value;
}

}  // namespace

std::string_view to_string(CodeKind kind) {
    return kind == CodeKind::diagnosis ? "diagnosis" : "procedure";
}

CodeKind parse_code_kind(std::string_view text) {
    if (text == "diagnosis") return CodeKind::diagnosis;
    if (text == "procedure") return CodeKind::procedure;
    throw SchemaError("unknown code kind '" + std::string(text) + "'");
}

TableReader::TableReader(const std::filesystem::path& path, const std::vector<std::string>& required)
    : in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path.string());
    reader_ = std::make_unique<csv::Reader>(in_);
    std::vector<std::string> header;
    if (!reader_->next(header)) throw SchemaError(path.string() + ": missing header row");
    width_ = header.size();
    for (const auto& name : required) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw SchemaError(path.string() + ": missing required column '" + name + "'");
        }
        positions_.push_back(static_cast<std::size_t>(it - header.begin()));
    }
}

bool TableReader::next(std::vector<std::string>& row) {
    if (!reader_->next(row)) return false;
    if (row.size() != width_) {
        throw RecordError(reader_->record_line(),
                          "expected " + std::to_string(width_) + " fields, found " + std::to_string(row.size()));
    }
    return true;
}

NoteEventStream::NoteEventStream(const std::filesystem::path& path, NoteLoadOptions options)
    : table_(path, {options.columns.admission_id, options.columns.subject_id, options.columns.category,
                    options.columns.text}),
      options_(std::move(options)) {}

std::optional<NoteEvent> NoteEventStream::next() {
    while (!options_.limit || stats_.yielded < *options_.limit) {
        bool counted = false;
        try {
            if (!table_.next(row_)) return std::nullopt;
            ++stats_.data_rows;
            counted = true;
            const auto line = table_.record_line();
            const auto& hadm = row_[table_.column(0)];
            if (trim(hadm).empty()) throw RecordError(line, "null " + options_.columns.admission_id);
            NoteEvent note;
            note.admission_id = require_positive(hadm, options_.columns.admission_id, line);
            note.subject_id = require_positive(row_[table_.column(1)], options_.columns.subject_id, line);
            note.category = row_[table_.column(2)];
            note.text = std::move(row_[table_.column(3)]);
            if (trim(note.text).empty()) throw RecordError(line, "empty note text");
            if (options_.category && note.category != *options_.category) {
                ++stats_.filtered;
                continue;
            }
            ++stats_.yielded;
            return note;
        } catch (const RecordError&) {
            if (!options_.lenient) throw;
            if (!counted) ++stats_.data_rows;
            ++stats_.skipped;
        }
    }
    return std::nullopt;
}

CodeRecordStream::CodeRecordStream(const std::filesystem::path& path, CodeKind kind, CodeLoadOptions options)
    : table_(path, {options.columns.admission_id, options.columns.code, options.columns.seq_num}),
      kind_(kind),
      options_(std::move(options)) {}

std::optional<CodeRecord> CodeRecordStream::next() {
    while (!options_.limit || stats_.yielded < *options_.limit) {
        bool counted = false;
        try {
            if (!table_.next(row_)) return std::nullopt;
            ++stats_.data_rows;
            counted = true;
            const auto line = table_.record_line();
            CodeRecord record;
            record.kind = kind_;
            const auto& hadm = row_[table_.column(0)];
            if (trim(hadm).empty()) throw RecordError(line, "null " + options_.columns.admission_id);
            record.admission_id = require_positive(hadm, options_.columns.admission_id, line);
            record.code = std::string(trim(row_[table_.column(1)]));
            if (record.code.empty()) throw RecordError(line, "empty " + options_.columns.code);
            record.seq_num = require_positive(row_[table_.column(2)], options_.columns.seq_num, line);
            ++stats_.yielded;
            return record;
        } catch (const RecordError&) {
            if (!options_.lenient) throw;
            if (!counted) ++stats_.data_rows;
            ++stats_.skipped;
        }
    }
    return std::nullopt;
}

NoteEventStream load_note_events(const std::filesystem::path& path, NoteLoadOptions options) {
    return NoteEventStream(path, std::move(options));
}

CodeRecordStream load_code_records(const std::filesystem::path& path, CodeKind kind, CodeLoadOptions options) {
    return CodeRecordStream(path, kind, std::move(options));
}

std::vector<NoteEvent> read_all(NoteEventStream& stream) {
    std::vector<NoteEvent> out;
    while (auto note = stream.next()) out.push_back(std::move(*note));
    return out;
}

std::vector<CodeRecord> read_all(CodeRecordStream& stream) {
    std::vector<CodeRecord> out;
    while (auto record = stream.next()) out.push_back(std::move(*record));
    return out;
}

std::vector<CodeDescriptor> load_code_descriptors(const std::filesystem::path& path, CodeKind kind,
                                                  const DescriptorColumns& columns) {
    TableReader table(path, {columns.code, columns.short_title});
    std::vector<CodeDescriptor> out;
    std::vector<std::string> row;
    std::unordered_map<std::string, std::size_t> seen;
    while (table.next(row)) {
        CodeDescriptor d{std::string(trim(row[table.column(0)])), kind, row[table.column(1)]};
        if (d.code.empty()) throw RecordError(table.record_line(), "empty " + columns.code);
        if (!seen.emplace(d.code, table.record_line()).second) {
            throw RecordError(table.record_line(), "duplicate descriptor for code " + d.code);
        }
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace icdbert
