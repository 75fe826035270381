#pragma once

#include <stdexcept>
#include <string>

namespace wpt {

// Bad or inconsistent configuration values, reported with the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition. This is a program error.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Factorization or training produced non-finite or non-PD results.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void expects(bool condition, const char* what) {
  if (!condition) throw ContractViolation(what);
}

}  // namespace wpt
