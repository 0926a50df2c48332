#pragma once

#include <stdexcept>
#include <string>

namespace rtune {

// Base class for all library errors; the CLI maps these to nonzero exits.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid domain input: out-of-range index, mismatched space, bad argument.
struct ValidationError : Error {
    using Error::Error;
};

// Malformed or corrupted file content (CSV, JSON model, LUT binary).
struct FormatError : Error {
    using Error::Error;
};

// Training preconditions not met (dataset too small, empty depth range).
struct TrainingError : Error {
    using Error::Error;
};

// Bad pipeline configuration document.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace rtune
