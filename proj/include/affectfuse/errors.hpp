#pragma once

#include <stdexcept>
#include <string>

namespace affectfuse {

// Base for every error raised by the toolkit.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operand shapes are incompatible.
struct ShapeError : Error {
    using Error::Error;
};

// NaN/Inf produced or consumed, divergence, degenerate statistics that cannot be defined.
struct NumericError : Error {
    using Error::Error;
};

// Invalid model/training/CLI configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed input file.
struct ParseError : Error {
    using Error::Error;
};

// Inconsistent or missing data (alignment, partitions, missing labels).
struct DataError : Error {
    using Error::Error;
};

// Misuse of the differentiation tape.
struct TapeError : Error {
    using Error::Error;
};

}  // namespace affectfuse
