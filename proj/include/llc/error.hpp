#pragma once

#include <stdexcept>
#include <string>

namespace llc {

// Error categories, mapped to CLI exit codes in tools/llc_main.cpp.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad/unknown config keys, invalid flag combinations.
struct ConfigError : Error {
    using Error::Error;
};

// Shape disagreements between tensors or artifacts.
struct DimensionError : Error {
    using Error::Error;
};

// Precondition violations on values (labels out of range, non-±1 entries, ...).
struct ValidationError : Error {
    using Error::Error;
};

// Unreadable/corrupt files, missing paths.
struct IoError : Error {
    using Error::Error;
};

// Malformed file contents (CSV cells, codebook lines, IDX headers).
struct ParseError : Error {
    using Error::Error;
};

// Non-finite losses, solver non-convergence.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace llc
