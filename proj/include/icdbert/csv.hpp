// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace icdbert::csv {

/// Streaming RFC-4180 record reader. Quoted fields may contain commas, doubled quotes,
/// and line breaks; CRLF and LF line endings are both accepted.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    /// Reads the next record into `fields`. Returns false at end of input.
    /// Throws RecordError for a malformed record after skipping past it, so a caller
    /// may catch, count, and keep reading.
    bool next(std::vector<std::string>& fields);

    /// Physical line (1-based) on which the most recently returned record started.
    std::size_t record_line() const noexcept { return record_line_; }

private:
    void skip_to_record_end();

    std::istream& in_;
    std::size_t line_ = 1;
    std::size_t record_line_ = 0;
};

/// Quotes a field only when it contains a comma, quote, CR, or LF.
std::string escape_field(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace icdbert::csv
