#pragma once

#include <stdexcept>
#include <string>

namespace astroseg {

// Root of all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input: files, shapes, datasets.
// CLI maps these to exit code 3.
struct FormatError : Error {
    using Error::Error;
};

// A computation cannot proceed or did not converge.
// CLI maps these to exit code 4.
struct NumericError : Error {
    using Error::Error;
};

// A caller-supplied parameter violates an operation's preconditions.
// CLI maps these to exit code 2.
struct InvalidArgument : Error {
    using Error::Error;
};

struct DimensionMismatch : FormatError {
    using FormatError::FormatError;
};

struct OutOfBounds : FormatError {
    using FormatError::FormatError;
};

} // namespace astroseg
