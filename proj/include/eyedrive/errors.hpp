#pragma once

#include <stdexcept>
#include <string>

namespace eyedrive {

/// Tensor extents or parameter shapes do not line up.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value is outside its documented range.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was called in the wrong order (e.g. backward before forward).
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller-supplied data is malformed.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A NaN or Inf showed up where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reading or writing a file failed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace eyedrive
