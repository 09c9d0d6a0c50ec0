#pragma once

#include <stdexcept>

namespace bfc {

/// Raised when inputs violate a documented precondition (bad geometry,
/// non-positive viscosity, inverted control bounds, malformed config).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a solve cannot proceed numerically (CFL violation,
/// factorization failure, eigensolver breakdown).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bfc
