#pragma once

#include <stdexcept>
#include <string>

namespace bwe {

// Failure classes surfaced by the command line tool as distinct exit codes.
// Library preconditions throw std::invalid_argument; these three cover
// run-level configuration, input data, and numerical breakdown.

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bwe
