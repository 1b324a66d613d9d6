#ifndef MRD_ERRORS_HPP
#define MRD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mrd {

// Parameter outside the mathematical domain of an operation (non-PD
// correlation, zero size, probability outside (0,1), ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Cholesky (or conditional-variance) breakdown on a matrix that should be SPD.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed user input: schedules, configs, data files.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Iterative method failed to terminate.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mrd

#endif  // MRD_ERRORS_HPP
