#pragma once

#include <stdexcept>
#include <string>

namespace comve {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor shapes (or other dimensions) do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An index (label, token id, position) is out of its valid range.
class IndexError : public Error {
public:
    using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// A sequence or buffer cannot hold the requested content.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// A configuration value is invalid or inconsistent.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Bad user-supplied input (files, arguments, ranges).
class InputError : public Error {
public:
    using Error::Error;
};

/// A text file could not be parsed; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& what, size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    size_t line() const noexcept { return line_; }

private:
    size_t line_;
};

/// Records joined across files do not line up.
class JoinError : public Error {
public:
    using Error::Error;
};

/// An import file does not cover (exactly) the expected records.
class CoverageError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure (unreadable/unwritable path).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace comve
