#pragma once

#include <stdexcept>
#include <string>

namespace spillover {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CSV contents, misaligned series, bad arguments).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure could not produce a usable answer (singular systems, overflow).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An iterative estimator ran out of iterations.
class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace spillover
