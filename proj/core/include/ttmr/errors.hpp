#pragma once

#include <stdexcept>
#include <string>

namespace ttmr {

// Raised when tensor shapes or spatial geometries disagree with an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised for malformed files (bad magic, truncated payloads, unknown dtypes).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ttmr
