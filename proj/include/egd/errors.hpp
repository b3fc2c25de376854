#pragma once

#include <stdexcept>
#include <string>

namespace egd {

/// Argument outside the domain of a density or estimator (x = 0, v <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Input data violates a structural requirement (rank, zero samples, shapes).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested algorithm does not apply to the parameter regime.
class RegimeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Matrix factorization failed or produced nonfinite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace egd
