#pragma once

#include <stdexcept>
#include <string>

namespace comm_arena {

// Argument failed a shape or range precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Call is not legal in the current state (stepping a finished episode,
// DIAL update outside a communication mode, ...).
class RejectedCall : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A gradient, loss or parameter became NaN/inf.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace comm_arena
