#pragma once

#include <stdexcept>
#include <string>

namespace swarmlab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A SwarmConfig (or a change applied to one) violates its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An objective produced NaN/inf where a finite value was required.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was not met by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace swarmlab
