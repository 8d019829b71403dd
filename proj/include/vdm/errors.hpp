// Error types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace vdm {

// Mismatched lengths, sample rates, or channel counts.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid or physically inconsistent configuration values.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Metric is mathematically undefined for the given inputs.
struct UndefinedMetricError : std::runtime_error {
    explicit UndefinedMetricError(const std::string& what) : std::runtime_error(what) {}
};

// Cross-correlation alignment has no unique answer (e.g. constant inputs).
struct AlignmentError : std::runtime_error {
    explicit AlignmentError(const std::string& what) : std::runtime_error(what) {}
};

// Not enough signal content to proceed (too short, no edges, ...).
struct InsufficientSignalError : std::runtime_error {
    explicit InsufficientSignalError(const std::string& what) : std::runtime_error(what) {}
};

// Receiver could not lock onto the periodic structure.
struct SyncFailureError : std::runtime_error {
    explicit SyncFailureError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed file on disk; message carries the byte offset where parsing failed.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem level failure.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace vdm
