#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace wavesync {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad partition, shape mismatch, or otherwise malformed input.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A coupling matrix fails the block row-sum (kernel invariance) condition.
/// Carries the worst-violating block pair for diagnostics.
class IncompatibleError : public Error {
 public:
  IncompatibleError(const std::string& what, int row_group, int col_group,
                    double violation)
      : Error(what), row_group(row_group), col_group(col_group),
        violation(violation) {}
  int row_group;
  int col_group;
  double violation;
};

/// Matrix has an eigenvalue pair with imaginary part beyond tolerance.
class NotRealSpectrumError : public Error {
 public:
  using Error::Error;
};

/// Eigenvector matrix too ill-conditioned: matrix treated as defective.
class NotDiagonalizableError : public Error {
 public:
  using Error::Error;
};

/// Gram matrix of a biorthogonal family is numerically singular.
class DegenerateFamilyError : public Error {
 public:
  using Error::Error;
};

/// rank(C_p D) != N - p where the pipeline requires equality.
class RankConditionError : public Error {
 public:
  using Error::Error;
};

/// Time step violates the stability bound.
class CflError : public Error {
 public:
  using Error::Error;
};

/// Non-finite state detected during time stepping.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, long step_index)
      : Error(what), step_index(step_index) {}
  long step_index;
};

/// Iterative solver failed to converge; carries the residual history.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : Error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

}  // namespace wavesync
