#pragma once

#include <stdexcept>
#include <string>

namespace branchflow {

// Malformed or inconsistent user input (bad file, mass mismatch, alpha out of range).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A structural invariant of a transport network was broken by an algorithm.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Two-target problem with coincident targets.
class DegenerateInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw InputError("alpha must lie in (0, 1], got " + std::to_string(alpha));
}

}  // namespace branchflow
