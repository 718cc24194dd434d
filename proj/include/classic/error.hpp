#pragma once

#include <stdexcept>
#include <string>

namespace classic {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for an op.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced (or consumed) by a numeric routine.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or user input. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace classic
