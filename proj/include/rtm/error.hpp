#pragma once

#include <stdexcept>
#include <string>

namespace rtm {

// Shape/dimension contract violations (mismatched matmul dims, bad reshape, ...).
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or other numeric contract violations.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Configuration parsing/validation failures; message carries the field path.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint I/O failures, distinguished by kind so callers can react.
struct CheckpointError : std::runtime_error {
  enum class Kind { io, format, version_mismatch, truncated, digest_mismatch };
  CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

// Matching/rejection failures (e.g. every pool sample rejected).
struct MatchError : std::runtime_error {
  explicit MatchError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rtm
