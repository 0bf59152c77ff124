#pragma once

#include <stdexcept>
#include <string>

namespace sclera {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (bad flag, out-of-range parameter, x_l too large).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dataset or checkpoint could not be read from disk.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Tensor or image dimensions disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value that must be finite or normalized was not.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace sclera
