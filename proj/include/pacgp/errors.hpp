#pragma once

#include <stdexcept>
#include <string>

namespace pacgp {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kSuccess = 0,
  kUsage = 2,
  kNumeric = 3,
  kIo = 4,
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Shape or length mismatch between arguments.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Factorization failure, non-finite objective, or other numerical breakdown.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// klinv partials requested where p and q coincide, so the implicit
/// derivative has a vanishing denominator.
class BoundaryError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// File missing, unreadable, or malformed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent user configuration.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace pacgp
