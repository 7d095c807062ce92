#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace allact {

// Bad caller input: empty sets, inconsistent sizes, invalid configuration.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Vector widths that do not chain. `layer()` is the offending layer index,
// or npos when the mismatch is not tied to a layer.
class ShapeError : public ArgumentError {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  ShapeError(const std::string& what, std::size_t layer = npos)
      : ArgumentError(what), layer_(layer) {}

  std::size_t layer() const { return layer_; }

 private:
  std::size_t layer_;
};

// A precondition on a numeric parameter (step size, tolerance) was violated.
class PreconditionError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

// NaN/Inf produced or consumed.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fixed-point iteration that cannot converge (unstable closed loop).
class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Requested operation is not defined for this configuration, e.g. an
// advantage oracle for an environment without one.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace allact
