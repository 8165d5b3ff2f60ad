#pragma once

#include <stdexcept>
#include <string>

namespace qkernel {

// Bad input or configuration. The CLI maps this to exit code 2.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A request that would exceed a configured resource cap (e.g. qubit count).
class ResourceLimit : public std::length_error {
 public:
  using std::length_error::length_error;
};

// A computed quantity violated an invariant it must hold by construction.
// The CLI maps this to exit code 3.
class InternalConsistency : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace qkernel
