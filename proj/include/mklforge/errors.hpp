#pragma once

#include <stdexcept>
#include <string>

namespace mklforge {

// Base type for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (bad sizes are reported
// through DimensionMismatch instead).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Factorization or other floating-point computation failed to reach
// its accuracy contract.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

// An iterative routine (eigensolver, fixed point, ...) did not converge
// where convergence is part of the contract.
class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class NonFiniteFeature : public Error {
 public:
  using Error::Error;
};

// A kernel matrix failed validation (negative eigenvalue beyond
// tolerance, or a vanishing diagonal under unit-diagonal scaling).
class DegenerateKernel : public Error {
 public:
  using Error::Error;
};

// Prediction-side Gram blocks were requested from a bank built without
// test rows.
class MissingCrossGrams : public Error {
 public:
  using Error::Error;
};

// A direction that must be normalized has (numerically) zero length.
class DegenerateDirection : public Error {
 public:
  using Error::Error;
};

class SingleClass : public Error {
 public:
  using Error::Error;
};

class SingularSample : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line) : Error(what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_ = 0;
};

class LabelCoercionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Configuration file or CLI flag violates the schema.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mklforge
