#pragma once

#include <stdexcept>
#include <string>

namespace dccf {

// Each error category maps to one CLI exit code (see tools/dccf.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

// Bad dimensions, invalid hyperparameters, contradictory flags.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. backward without a cached forward pass.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or invariant-violating input data.
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

// Non-finite values during forward, backward or optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

}  // namespace dccf
