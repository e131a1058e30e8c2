#pragma once

#include <optional>
#include <string>

#include "stmpc/model.hpp"

namespace stmpc {

enum class TerminalMode { invariant_set, terminal_equality };

/// Invariant set for tracking over the extended variable (x, x_a, u_a),
/// stored both in public half-space form and in the internal (x, theta)
/// coordinates used to build it (theta parametrizes the equilibrium
/// manifold through the steady-state basis).
struct TrackingInvariantSet {
  Polytope halfspaces;      // over (x, x_a, u_a) in R^{2n+m}
  Polytope internal;        // over (x, theta) in R^{n+r}
  Matrix basis;             // (n+m) x r equilibrium basis
  int iterations = 0;
  bool truncated = false;   // iteration cap hit; set verified by sampling only

  bool contains(const Vector& x, const Vector& x_a, const Vector& u_a,
                double tol = 1e-9) const;
  double violation(const Vector& x, const Vector& x_a,
                   const Vector& u_a) const;
};

struct TerminalIngredients {
  Matrix K;  // m x n, local law u = K(x - x_a) + u_a
  Matrix P;  // n x n terminal weight; zero in terminal-equality mode
  double lambda = 0.99;
  TerminalMode mode = TerminalMode::invariant_set;
  std::optional<TrackingInvariantSet> omega;
};

struct LqrResult {
  Matrix K;
  Matrix P;
  int iterations = 0;
};

/// Infinite-horizon discrete LQR by Riccati fixed-point iteration
/// (absolute tolerance 1e-12, cap 1e5). A + BK is Schur on success.
LqrResult compute_lqr_gain(const LinearModel& model, const Matrix& Q,
                           const Matrix& R, double tol = 1e-12,
                           int max_iter = 100000);

/// P solving P = A_K' P A_K + Q_bar as the sum of the matrix power series,
/// iterated (with squaring) to residual <= tol.
Matrix solve_lyapunov(const Matrix& A_K, const Matrix& Q_bar,
                      double tol = 1e-10);

struct InvariantSetOptions {
  int max_iterations = 200;
  double redundancy_tol = 1e-9;
};

/// Maximal admissible invariant set for tracking: constraint propagation
/// on the extended autonomous system (x, x_a, u_a) under the local law,
/// with per-half-space redundancy elimination.
TrackingInvariantSet compute_tracking_invariant_set(
    const LinearModel& model, const Matrix& K, const Polytope& Z,
    double lambda, const InvariantSetOptions& opts = {});

/// Terminal-equality variant: P = 0, constraint x(N) = x_a. Requires the
/// N-step controllability matrix to have full rank.
TerminalIngredients terminal_equality_ingredients(const LinearModel& model,
                                                  const Matrix& Q,
                                                  const Matrix& R, int N,
                                                  double lambda);

}  // namespace stmpc
