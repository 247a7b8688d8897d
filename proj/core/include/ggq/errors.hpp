#pragma once

#include <stdexcept>
#include <string>

namespace ggq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad tuning constants, dimension mismatches.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An operation was asked about a state/action it is not defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Singular or ill-conditioned linear algebra.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The stochastic minimizer produced a non-finite iterate.
class EstimationError : public Error {
 public:
  using Error::Error;
};

}  // namespace ggq
