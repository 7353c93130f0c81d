#pragma once

#include <stdexcept>
#include <string>

namespace cascade {

/// Raised when an input violates a documented precondition or invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for failures at run time that are not caused by bad input
/// (I/O, backend transport, exhausted retries).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cascade
