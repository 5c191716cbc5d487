#pragma once

#include <stdexcept>
#include <string>

namespace compenkit {

/// Shape or dimension mismatch between tensors/grids.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid argument value (negative stride, size too small, ...).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Degenerate geometric configuration (collinear/duplicate TPS control points).
class DegenerateError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Filesystem / image IO failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergedError : public std::runtime_error {
public:
    DivergedError(const std::string& msg, int iter)
        : std::runtime_error(msg), iteration(iter) {}
    int iteration;
};

} // namespace compenkit
