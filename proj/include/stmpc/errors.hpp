#pragma once

#include <stdexcept>
#include <string>

namespace stmpc {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : Error {
  using Error::Error;
};

/// No admissible equilibrium produces the requested target output.
struct InfeasibleTarget : Error {
  using Error::Error;
};

/// linearize() called at a point that is not an equilibrium.
struct NonEquilibrium : Error {
  using Error::Error;
};

/// Riccati recursion failed to reach a fixed point within the iteration cap.
struct RiccatiDivergence : Error {
  using Error::Error;
};

/// Lyapunov solve requested for a matrix with spectral radius >= 1.
struct NotSchur : Error {
  using Error::Error;
};

/// Terminal-equality mode requires a full-rank N-step controllability matrix.
struct NotNStepControllable : Error {
  using Error::Error;
};

/// Penalty gradients are only available for the squared-hinge exponent.
struct UnsupportedExponent : Error {
  using Error::Error;
};

/// The OCP has no feasible point from the given initial state.
struct InfeasibleProblem : Error {
  using Error::Error;
};

/// Shifted candidate violates constraints beyond tolerance: the plant state
/// disagrees with the one-step model prediction.
struct PlantModelMismatch : Error {
  using Error::Error;
};

/// First closed-loop solve failed; x(0) is outside the domain of attraction.
struct InitialInfeasible : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct LpError : Error {
  using Error::Error;
};

}  // namespace stmpc
