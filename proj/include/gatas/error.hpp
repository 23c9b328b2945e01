#pragma once

#include <stdexcept>
#include <string>

namespace gatas {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invalid configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data, violated graph/dataset invariants, corrupt caches.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Tensor shape mismatch or invalid numeric op usage.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values surfaced during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint incompatible with the configured model dimensions.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace gatas
