#pragma once

#include <stdexcept>
#include <string>

namespace selfconv {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Patch, window or padding target falls outside the image.
class BoundsError : public Error {
 public:
  using Error::Error;
};

/// Operands have mismatched dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An inverse transform expected to be real carried a large imaginary part.
class SpectralResidueError : public Error {
 public:
  using Error::Error;
};

/// Normalized correlation requested against an all-zero reference patch.
class DegeneratePatchError : public Error {
 public:
  using Error::Error;
};

class EmptyAggregation : public Error {
 public:
  using Error::Error;
};

/// Non-finite input reached a decomposition.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid combination of user-facing parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace selfconv
