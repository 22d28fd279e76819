#pragma once

#include <stdexcept>
#include <string>

namespace argem {

/// Extent or layout mismatch between operands.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A precondition of the public API was violated.
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A computation produced or received a non-finite value.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input file; message carries the line number.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Requested split sizes cannot be satisfied by the graph.
struct SizingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void check_shape(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

inline void check_contract(bool ok, const std::string& msg) {
  if (!ok) throw ContractError(msg);
}

}  // namespace argem
