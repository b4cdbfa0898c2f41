#pragma once

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <stdexcept>
#include <string>

namespace matnet {

// Error taxonomy. The CLI maps these onto exit codes: configuration and
// contract problems exit 1, data problems exit 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape disagreement between tensors or between a tensor and an operation.
struct DimensionError : Error {
    using Error::Error;
};

// Invalid configuration value (unknown enum, bad hyperparameter, bad key).
struct ConfigError : Error {
    using Error::Error;
};

// API misuse, e.g. backward() on a non-scalar.
struct ContractError : Error {
    using Error::Error;
};

// Bad data content (out-of-range value, duplicate timestamp, unknown level).
struct DataError : Error {
    using Error::Error;
};

// Malformed file content; message carries the offending line number.
struct ParseError : DataError {
    using DataError::DataError;
};

// Timestamp misalignment between series.
struct AlignmentError : DataError {
    using DataError::DataError;
};

// Missing sub-hour slot during resampling.
struct GapError : DataError {
    using DataError::DataError;
};

// Checkpoint file corruption (bad magic, checksum, truncation).
struct IntegrityError : DataError {
    using DataError::DataError;
};

// Checkpoint format version not supported by this build.
struct IncompatibilityError : DataError {
    using DataError::DataError;
};

// Metric has no defined value for the given inputs (all-zero or constant
// actuals); surfaced instead of returning NaN.
struct UndefinedMetricError : DataError {
    using DataError::DataError;
};

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Level comes from MATNET_LOG={error|info|debug}; default info.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("MATNET_LOG");
        if (!env) return LogLevel::info;
        const std::string v(env);
        if (v == "error") return LogLevel::error;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::info;
    }();
    return level;
}

inline void log_error(const std::string& msg) {
    std::cerr << "[matnet] error: " << msg << "\n";
}

inline void log_warn(const std::string& msg) {
    if (log_level() >= LogLevel::info) std::cerr << "[matnet] warning: " << msg << "\n";
}

inline void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::info) std::cerr << "[matnet] " << msg << "\n";
}

inline void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::debug) std::cerr << "[matnet] debug: " << msg << "\n";
}

}  // namespace matnet
