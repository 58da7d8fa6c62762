#pragma once

#include <stdexcept>
#include <string>

namespace rsoba {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter left its valid domain (gimbal lock, negative metric, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Plane too close to the origin for the closest-point chart.
class DegeneratePlaneError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A metric was requested on a group matrix with no points.
class EmptyGroupError : public Error {
 public:
  using Error::Error;
};

/// Malformed window, scene specification, config or input file.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A damped block or reduced system could not be factorized.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

}  // namespace rsoba
