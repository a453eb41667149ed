// SPDX-License-Identifier: Apache-2.0
#include "icdbert/csv.hpp"

#include "icdbert/error.hpp"

namespace icdbert::csv {

namespace {

constexpr int kEof = std::char_traits<char>::eof();

}  // namespace

bool Reader::next(std::vector<std::string>& fields) {
    fields.clear();
    int c = in_.peek();
    if (c == kEof) return false;
    record_line_ = line_;

    std::string field;
    enum class State { field_start, unquoted, quoted, quote_in_quoted };
    State state = State::field_start;

    while (true) {
        c = in_.get();
        if (c == kEof) {
            if (state == State::quoted) {
                throw RecordError(record_line_, "unterminated quoted field at end of input");
            }
            fields.push_back(std::move(field));
            return true;
        }
        const char ch = static_cast<char>(c);
        switch (state) {
            case State::field_start:
                if (ch == '"') {
                    state = State::quoted;
                    break;
                }
                state = State::unquoted;
                [[fallthrough]];
            case State::unquoted:
                if (ch == ',') {
                    fields.push_back(std::move(field));
                    field.clear();
                    state = State::field_start;
                } else if (ch == '\n' || ch == '\r') {
                    if (ch == '\r' && in_.peek() == '\n') in_.get();
                    ++line_;
                    fields.push_back(std::move(field));
                    return true;
                } else if (ch == '"') {
                    skip_to_record_end();
                    throw RecordError(record_line_, "quote character inside unquoted field");
                } else {
                    field.push_back(ch);
                }
                break;
            case State::quoted:
                if (ch == '"') {
                    state = State::quote_in_quoted;
                } else {
                    if (ch == '\n') ++line_;
                    field.push_back(ch);
                }
                break;
            case State::quote_in_quoted:
                if (ch == '"') {
                    field.push_back('"');
                    state = State::quoted;
                } else if (ch == ',') {
                    fields.push_back(std::move(field));
                    field.clear();
                    state = State::field_start;
                } else if (ch == '\n' || ch == '\r') {
                    if (ch == '\r' && in_.peek() == '\n') in_.get();
                    ++line_;
                    fields.push_back(std::move(field));
                    return true;
                } else {
                    skip_to_record_end();
                    throw RecordError(record_line_, "unexpected character after closing quote");
                }
                break;
        }
    }
}

void Reader::skip_to_record_end() {
    // Resynchronise at the next physical line break.
    while (true) {
        const int c = in_.get();
        if (c == kEof) return;
        if (c == '\n') {
            ++line_;
            return;
        }
        if (c == '\r') {
            if (in_.peek() == '\n') in_.get();
            ++line_;
            return;
        }
    }
}

std::string escape_field(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << escape_field(fields[i]);
    }
    out << '\n';
}

}  // namespace icdbert::csv
