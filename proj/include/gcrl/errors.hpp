#pragma once

#include <stdexcept>
#include <string>

namespace gcrl {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid environment construction (bad dimensions, impossible room
// tiling, distractor on a wall, ...). Messages name the offending field.
struct ConstructionError : Error {
    using Error::Error;
};

// Bad user-facing configuration: unknown policy name, gamma out of
// range, unknown distance metric, malformed pipeline config.
struct ConfigError : Error {
    using Error::Error;
};

// Operation called with unusable input (empty dataset, sample from a
// different grid shape).
struct InputError : Error {
    using Error::Error;
};

// File parsing failure; carries a 1-based line number when known.
struct ParseError : Error {
    ParseError(const std::string& msg, long line = -1)
        : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_number(line) {}
    long line_number;
};

// Stored data contradicts itself (replay mismatch, policy/AMDP state
// mismatch).
struct IntegrityError : Error {
    using Error::Error;
};

// Exhaustive search or enumeration exceeded its configured cap.
struct ResourceError : Error {
    using Error::Error;
};

// Goal cannot be satisfied in the environment by construction
// (target tile out of bounds or inside a wall).
struct InfeasibleGoalError : Error {
    using Error::Error;
};

// External-agent wire protocol failure (timeout, handshake).
struct ProtocolError : Error {
    using Error::Error;
};

// Goal text does not match any supported instruction pattern.
struct UnsupportedGoalError : Error {
    using Error::Error;
};

} // namespace gcrl
