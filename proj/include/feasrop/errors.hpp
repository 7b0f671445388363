#pragma once

#include <stdexcept>
#include <string>

namespace feasrop {

/// Bad arguments: dimension mismatches, out-of-range ranks, negative budgets.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base for failures of the numerical machinery itself.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPsdError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankDeficiencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IllPosedProjectionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class LineSearchError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace feasrop
