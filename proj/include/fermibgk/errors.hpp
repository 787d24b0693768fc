#pragma once

#include <stdexcept>
#include <string>

namespace fermibgk {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad argument values (non-finite inputs, unsupported orders, ...).
class UsageError : public Error {
  public:
    using Error::Error;
};

/// Malformed or inconsistent configuration input.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// B(N,P,E) outside the invertible branch (0, beta(-ln 3)).
class OutOfBranchError : public Error {
  public:
    OutOfBranchError(double B, double beta_max)
        : Error("B = " + std::to_string(B) + " outside the branch (0, beta(-ln 3) = "
                + std::to_string(beta_max) + "); equilibrium coefficients are not uniquely defined")
        , B(B)
        , beta_max(beta_max)
    {
    }
    double B;
    double beta_max;
};

/// Moments with E - |P|^2/N <= 0 (no kinetic state can produce them).
class DegenerateMomentsError : public Error {
  public:
    using Error::Error;
};

/// Iterative solve did not reach tolerance within the iteration budget.
class ConvergenceError : public Error {
  public:
    ConvergenceError(const std::string& what, double residual, int iterations)
        : Error(what + " (residual " + std::to_string(residual) + " after "
                + std::to_string(iterations) + " iterations)")
        , residual(residual)
        , iterations(iterations)
    {
    }
    double residual;
    int iterations;
};

/// A spatial cell whose moments left the admissible branch during a run.
class AdmissibilityError : public Error {
  public:
    AdmissibilityError(int cell, double B, double beta_max)
        : Error("cell " + std::to_string(cell) + ": B = " + std::to_string(B)
                + " violates 0 < B < beta(-ln 3) = " + std::to_string(beta_max))
        , cell(cell)
        , B(B)
        , beta_max(beta_max)
    {
    }
    int cell;
    double B;
    double beta_max;
};

/// E0*k - 9*N0^2/(10*a0) <= 0: the global equilibrium parameters are inadmissible.
class PositivityError : public Error {
  public:
    using Error::Error;
};

/// A state or field violated a structural invariant (e.g. F outside [0,1]).
class InvariantViolationError : public Error {
  public:
    using Error::Error;
};

/// Collision frequency undefined for the given coefficients (a^m with a = 0, m < 0).
class SingularFrequencyError : public Error {
  public:
    using Error::Error;
};

} // namespace fermibgk
