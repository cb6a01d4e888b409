#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace faultlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or parameter dimensions that do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Inputs that violate an operation's preconditions (empty data, bad ranges).
class InputError : public Error {
public:
    using Error::Error;
};

/// Training diverged or could not start.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents. Carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InputError(msg);
}

inline void require_shape(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

}  // namespace faultlab
