#pragma once

#include <stdexcept>
#include <string>

namespace silo {

// Base for everything this library throws. Messages are one-line and
// actionable; callers that need to discriminate catch the subtype.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : Error {
    using Error::Error;
};

// Malformed input files (PGM, configs, checkpoints).
struct ParseError : Error {
    using Error::Error;
};

struct CheckpointError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Requested operation is valid C++ but unsupported by the model/operator
// (e.g. an explicit matrix of a nonlinear degradation).
struct UnsupportedError : Error {
    using Error::Error;
};

// Numerical failure mid-run (NaN loss, non-finite latent).
struct NumericError : Error {
    using Error::Error;
};

}  // namespace silo
