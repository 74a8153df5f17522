#pragma once

#include <stdexcept>
#include <string>

namespace red {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes or values that violate an operation's preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Hyperparameters that cannot describe a valid episode.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing, unreadable or corrupt input files.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// A single source image could not be turned into a task image.
class SynthesisError : public Error {
 public:
  using Error::Error;
};

}  // namespace red
