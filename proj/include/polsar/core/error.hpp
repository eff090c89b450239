#pragma once

#include <stdexcept>
#include <string>

namespace polsar {

/// Base for all library errors. `exit_code()` maps onto the CLI contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed files, inconsistent datasets, invalid configs.
class DataError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

/// NaN loss, undefined metric, or any other numerical breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

}  // namespace polsar
