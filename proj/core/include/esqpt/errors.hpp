#pragma once

#include <stdexcept>
#include <string>

namespace esqpt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Out-of-range or inconsistent model/trap/noise parameters.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Detuning sign convention violated: requires (δ_r + δ_b) < 0 and δ_r > δ_b.
class ConventionError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Regime δ requested while Ω₁ + Ω₂ = 0.
class UndefinedRegimeError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Operation called outside the phase where it is defined (e.g. S2 only).
class PhaseError : public Error {
 public:
  using Error::Error;
};

/// Invalid input domain (empty spectrum, non-positive width, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Operand dimensions disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: non-convergence, root finding, large residuals.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Adaptive step size fell below the configured floor.
class StiffnessError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Probability mass reached the top of the Fock cutoff.
class CutoffError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Wigner grid does not cover the state.
class CoverageError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Least-squares design matrix is too ill-conditioned to trust.
class FitDegeneracyError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Dense oracle asked to run on a space larger than it supports.
class OracleScopeError : public Error {
 public:
  using Error::Error;
};

/// Projection onto a subspace with (numerically) zero weight.
class ProjectionError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace esqpt
