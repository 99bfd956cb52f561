#pragma once

#include <stdexcept>
#include <string>

namespace lysim {

/// Raised when a probability vector fails validation.
class InvalidLaw : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when model parameters violate their invariants.
class InvalidParams : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two routes to the same derived quantity disagreed.
class InternalInconsistency : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A coupled chain left its ordering invariants. Always an implementation bug.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class AbsorbingState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RateOverflow : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

class SingularSystem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lysim
