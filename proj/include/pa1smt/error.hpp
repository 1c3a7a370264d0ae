#pragma once

#include <stdexcept>
#include <string>

namespace pa1smt {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration (exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable, malformed or dimensionally inconsistent data (exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

// Numerical failure inside a solver (exit code 3).
class SolverError : public Error {
 public:
  using Error::Error;
};

// A matrix expected to be positive definite could not be factorized, even
// after the ridge fallback.
class IndefiniteError : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace pa1smt
