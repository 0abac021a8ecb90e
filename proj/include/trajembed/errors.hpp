#ifndef TRAJEMBED_ERRORS_HPP
#define TRAJEMBED_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace trajembed {

// Base class for every failure the library reports. The CLI maps subtrees of
// this hierarchy onto its documented exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input model or file failed structural validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NonStochasticError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class DuplicateSymbolBranchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class UnreachableModeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class BadDensityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class NegativeTimeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class NoSuchBranchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class NonPositiveRateError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class DimensionMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class EmptyLogError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class TooFewSamplesError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class NoUniqueStationaryError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class StepTooLargeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class NotHermitianError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// An iterative or limiting procedure did not converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class NoConvergenceError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};
class NonConvergentLimitError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};
class HorizonTooShortError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};
class GridTooShortError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};
class HorizonExceededError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};
class LogBranchFailureError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};

// Model-structure failures surfaced by the quantum constructions.
class UnsupportedDwellFamilyError : public Error {
 public:
  using Error::Error;
};
class NotPSDError : public Error {
 public:
  using Error::Error;
};
class InsufficientSpanError : public Error {
 public:
  using Error::Error;
};
class InconsistentActionError : public Error {
 public:
  using Error::Error;
};
class DeadStateError : public Error {
 public:
  using Error::Error;
};
class ExpFailureError : public Error {
 public:
  using Error::Error;
};

// Reverse map refused: some jump operator is not rank one.
class NotErasingError : public Error {
 public:
  using Error::Error;
};

}  // namespace trajembed

#endif
