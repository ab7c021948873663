#pragma once

#include <stdexcept>
#include <string>

namespace prefnoise {

// Invalid configuration values (bad dimensions, out-of-range rates, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// API misuse: out-of-range indices, empty inputs, invalid thresholds.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed input files; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& message, long line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                      : message),
          line_(line) {}

    long line() const noexcept { return line_; }

private:
    long line_;
};

// Non-finite loss or parameters during training.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace prefnoise
