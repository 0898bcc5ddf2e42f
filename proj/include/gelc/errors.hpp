#pragma once

#include <stdexcept>
#include <string>

namespace gelc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input lies outside a family's support or a parameter constraint is violated.
struct DomainError : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

// Raised by file ingestion; carries the 1-based line number when known.
struct ParseError : Error {
    ParseError(const std::string& msg, long line = -1)
        : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_number(line) {}
    long line_number;
};

// Perfect collinearity among (1, x, z-midpoints); the model is not identifiable.
struct RankError : Error {
    using Error::Error;
};

struct QuadratureError : Error {
    QuadratureError(const std::string& msg, double achieved)
        : Error(msg), achieved_error(achieved) {}
    double achieved_error;
};

// An observation has zero conditional likelihood under the current (theta, w).
struct DegenerateLikelihoodError : Error {
    DegenerateLikelihoodError(const std::string& msg, long index)
        : Error(msg), observation_index(index) {}
    long observation_index;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace gelc
