#pragma once

#include <stdexcept>
#include <string>

namespace panoptrack {

// Invalid argument passed to a library operation (threshold out of range,
// mismatched lengths, non-positive scale).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data (missing pose, out-of-order frames,
// unparsable file line).
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what, long line = 0)
      : std::runtime_error(what), line_(line) {}
  // 1-based line number for file inputs, 0 when not applicable.
  long line() const { return line_; }

 private:
  long line_;
};

// Numerical failure (NaN loss, covariance no longer positive definite).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace panoptrack
