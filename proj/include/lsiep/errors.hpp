#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lsiep {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violations: dimension mismatches, unsorted inputs, bad options.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Cholesky hit a non-positive pivot; for Gram matrices this means the basis
// matrices are linearly dependent.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

// An eigensolver ran out of its iteration budget.
class EigenFailure : public Error {
 public:
  EigenFailure(const std::string& msg, std::vector<double> residuals = {})
      : Error(msg), best_residuals(std::move(residuals)) {}

  std::vector<double> best_residuals;
};

// File and manifest problems.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lsiep
