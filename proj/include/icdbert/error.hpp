// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace icdbert {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Header, vocabulary, or tensor layout does not match what the reader expects.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A single malformed data record. Carries the 1-based physical line where the record starts.
class RecordError : public Error {
public:
    RecordError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// NaN or infinity appeared in a forward pass, gradient, or optimizer step.
class NumericError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Checkpoint is truncated, corrupted, from another format version, or shaped for another model.
class CheckpointError : public Error {
public:
    using Error::Error;
};

}  // namespace icdbert
