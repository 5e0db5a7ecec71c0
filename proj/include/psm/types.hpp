#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace psm {

// Dense interned identifiers. File-level identifiers are opaque strings;
// everything internal works on these.
using UserId = std::uint32_t;
using MessageId = std::uint32_t;
using Timestamp = std::int64_t;

inline constexpr const char* kToolVersion = "1.0.0";

// A value that may be undefined (zero denominator, empty set, ...).
// Undefined values are stored as 0 so downstream matrices stay rectangular;
// the flag travels alongside as its own column.
struct Flagged {
    double value = 0.0;
    bool defined = false;

    static Flagged of(double v) { return {v, true}; }
    static Flagged undefined() { return {0.0, false}; }
};

// Error taxonomy; the CLI maps these to exit codes (usage=1, data=2, internal=3).
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct ParameterError : UsageError {
    explicit ParameterError(const std::string& what) : UsageError(what) {}
};

}  // namespace psm
