#pragma once

#include <stdexcept>
#include <string>

namespace jumpns {

/// Invalid configuration, schema violation, or precondition failure on inputs.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The thinning window [0, r_max] does not cover scale * max(control).
class CoverageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite state or another unrecoverable numerical condition.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace jumpns
