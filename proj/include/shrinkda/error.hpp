#pragma once

#include <stdexcept>
#include <string>

namespace shrinkda {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when inputs violate an operation's preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Raised when a numerical procedure cannot produce a result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace detail
}  // namespace shrinkda
