#pragma once

#include <stdexcept>
#include <string>

namespace s2r {

// Exit-code mapping: validation=1, runtime=2, numeric=3 (see tools/).
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when an operation produces NaN/Inf from finite inputs.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace s2r
