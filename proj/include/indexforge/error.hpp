#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace indexforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Token sequence or expression text could not be parsed.
class ParseError : public Error {
public:
    ParseError(std::size_t position, const std::string& what)
        : Error("parse error at position " + std::to_string(position) + ": " + what),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Evaluated index had too many non-finite pixels to be usable.
class DegenerateIndex : public Error {
public:
    DegenerateIndex(double fraction, const std::string& what)
        : Error(what), fraction_(fraction) {}

    double fraction() const noexcept { return fraction_; }

private:
    double fraction_;
};

/// Malformed, missing, or inconsistent input data (files, manifests, planes).
class DataError : public Error {
public:
    using Error::Error;
};

/// Expression evaluation failed (e.g. channel index out of range).
class EvaluationError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace indexforge
