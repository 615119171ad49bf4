#pragma once

#include <stdexcept>
#include <string>

namespace nslang {

/// Invalid sizes, ranges or flags supplied by the caller.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Eigen-solve failures, non-finite intermediates, lost positivity.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operations invoked on inconsistent state (e.g. absorption with reflecting
/// boundaries, a chain cache that belongs to another trial).
class LogicError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace nslang
