#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace aalguard {

// Base for every error raised by the library. Callers that only need a
// message can catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input: fact files, rule text, queries, event CSV, checkpoints.
class ParseError : public Error {
public:
    ParseError(std::string message, std::size_t line, std::size_t offset,
               std::vector<std::string> expected = {})
        : Error(render(message, line, offset, expected)),
          detail_(std::move(message)),
          line_(line),
          offset_(offset),
          expected_(std::move(expected)) {}

    const std::string& detail() const noexcept { return detail_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t offset() const noexcept { return offset_; }
    const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    static std::string render(const std::string& message, std::size_t line,
                              std::size_t offset,
                              const std::vector<std::string>& expected) {
        std::string out = "line " + std::to_string(line) + ", offset " +
                          std::to_string(offset) + ": " + message;
        if (!expected.empty()) {
            out += " (expected ";
            for (std::size_t i = 0; i < expected.size(); ++i) {
                if (i) out += ", ";
                out += expected[i];
            }
            out += ")";
        }
        return out;
    }

    std::string detail_;
    std::size_t line_;
    std::size_t offset_;
    std::vector<std::string> expected_;
};

// Structurally well-formed input that violates a contract: arity, rule
// safety, unsupported built-ins, unknown select variables, config ranges.
class ValidationError : public Error {
public:
    using Error::Error;
};

class ArityError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

// Per-user event timestamps went backwards.
class OrderingError : public Error {
public:
    using Error::Error;
};

// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace aalguard
