#pragma once

#include <stdexcept>
#include <string>

namespace roughflow {

/// Raised when a caller passes arguments that violate an operation's contract
/// (shape mismatch, out-of-range parameter, time outside a path's span).
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a numerical procedure cannot produce a trustworthy result,
/// e.g. a covariance matrix that is not positive semidefinite.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised for invalid solver or experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Solution left the blow-up guard ball; `time` is the left end of the cell
/// where the guard tripped.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, double time) : NumericalError(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace roughflow
