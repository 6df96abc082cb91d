#pragma once

#include <stdexcept>
#include <string>

namespace gdifs {

// Malformed arguments: dimension mismatches, non-composable paths, bad windows.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A documented precondition of an operation does not hold (e.g. the graph is
// not strongly connected, the group is not finite).
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotStronglyConnected : public PreconditionError {
 public:
  NotStronglyConnected() : PreconditionError("graph is not strongly connected") {}
};

// A search exhausted its budget or a construction step failed in a way that
// should not happen for well-posed inputs.
class InternalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gdifs
