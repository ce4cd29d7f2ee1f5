#pragma once

#include <stdexcept>
#include <string>

namespace prefaudit {

/// Input data violates a contract (bad rows, missing support, degenerate
/// statistics). The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Not enough observations to compute a quantity; the quantity is absent,
/// not zero.
class InsufficientSupport : public DataError {
 public:
  using DataError::DataError;
};

/// A statistic is undefined because a variance is zero.
class DegenerateVariance : public DataError {
 public:
  using DataError::DataError;
};

/// Caller supplied an out-of-range parameter. The CLI maps this to exit 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace prefaudit
