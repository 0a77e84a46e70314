#pragma once

#include <stdexcept>
#include <string>

namespace routed_bell {

/// A documented precondition of an operation was violated by its arguments.
class PreconditionError : public std::invalid_argument {
 public:
  explicit PreconditionError(const std::string& what) : std::invalid_argument(what) {}
};

/// The computation itself could not be carried out (I/O, numerical breakdown).
class ComputationError : public std::runtime_error {
 public:
  explicit ComputationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace routed_bell
