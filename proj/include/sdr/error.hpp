#pragma once

#include <stdexcept>
#include <string>

namespace sdr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed user input: bad shapes, non-finite values, unparsable specs.
/// The command line maps this family to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

class NotSymmetricError : public InputError {
 public:
  using InputError::InputError;
};

/// A matrix that must be positive definite is not (to the scale-relative
/// threshold). Carries the offending eigenvalue.
class RankDeficientError : public Error {
 public:
  RankDeficientError(const std::string& what, double eigenvalue)
      : Error(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

/// Basis matrix without full column rank, constant response, empty slice.
class DegenerateBasisError : public Error {
 public:
  using Error::Error;
};

/// Fitting failed for a reason tied to the data (rank of the fitted
/// covariance below d, singular design, ...).
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace sdr
