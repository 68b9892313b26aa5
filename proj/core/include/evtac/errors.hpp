#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace evtac {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violates an operation precondition (non-positive depth, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A timestamp or index lies outside the supported span.
class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration value. `field` holds a JSON-pointer-like path when known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg, std::string field = {})
      : Error(field.empty() ? msg : field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed input data (event files, pose files, images).
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg, std::optional<std::uint64_t> offset = std::nullopt)
      : Error(offset ? msg + " (at byte offset " + std::to_string(*offset) + ")" : msg),
        offset_(offset) {}
  std::optional<std::uint64_t> byte_offset() const noexcept { return offset_; }

 private:
  std::optional<std::uint64_t> offset_;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class EmptyContactError : public Error {
 public:
  using Error::Error;
};

/// A metric was requested over an empty set of samples.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

}  // namespace evtac
