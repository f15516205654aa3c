#pragma once

#include <stdexcept>
#include <string>

namespace mgrad {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform to an operation's rule.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A loss, gradient or update produced inf/nan.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace mgrad
