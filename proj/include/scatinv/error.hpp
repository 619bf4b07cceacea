#pragma once

#include <stdexcept>
#include <string>

namespace scatinv {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched dimensions or layouts between arguments.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a scalar argument was violated.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A solve, factorization or iteration could not produce a usable result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A required file is absent or unreadable.
class MissingInputError : public Error {
 public:
  using Error::Error;
};

/// A file exists but does not parse.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace scatinv
