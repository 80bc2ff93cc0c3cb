#pragma once

#include <stdexcept>
#include <string>

namespace condmed {

/// Thrown when an operation refuses to run because its stated preconditions
/// do not hold (as opposed to malformed input). The CLI maps this to exit
/// code 2, plain invalid input to exit code 1.
class PreconditionError : public std::runtime_error {
 public:
  explicit PreconditionError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace condmed
