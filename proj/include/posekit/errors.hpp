#pragma once

#include <stdexcept>
#include <string>

namespace posekit {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad shapes, bad arguments, invalid configuration values.
struct ConfigError : Error {
    using Error::Error;
};

// NaN/Inf encountered in a tensor that must stay finite.
struct NumericError : Error {
    using Error::Error;
};

// File and format problems, split by kind so callers can tell them apart.
struct IoError : Error {
    using Error::Error;
};
struct BadMagicError : IoError {
    using IoError::IoError;
};
struct TruncatedFileError : IoError {
    using IoError::IoError;
};
struct ChecksumError : IoError {
    using IoError::IoError;
};
struct ParseError : IoError {
    using IoError::IoError;
};

// Geometry failures.
struct BehindCameraError : Error {
    using Error::Error;
};
struct DegenerateError : Error {
    using Error::Error;
};
struct SolverError : Error {
    using Error::Error;
};

} // namespace posekit
