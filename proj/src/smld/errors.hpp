#pragma once

#include <stdexcept>
#include <string>

namespace smld {

/// Base class for all library errors. Each subclass maps onto one C status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point left the interior of a constrained parameter domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be invertible (or have a spectral gap) is numerically singular.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Moments requested where they do not exist (e.g. too few degrees of freedom).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace smld
