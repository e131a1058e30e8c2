#pragma once

#include <functional>

#include "stmpc/polytope.hpp"

namespace stmpc {

/// Discrete LTI prediction model
///   x(k+1) = A x(k) + B u(k),  y(k) = C x(k) + D u(k).
struct LinearModel {
  Matrix A, B, C, D;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int p() const { return static_cast<int>(C.rows()); }

  /// Dimension consistency; throws DimensionError.
  void check_dimensions() const;

  /// Construction path that additionally enforces controllability and
  /// observability (tolerance-based rank).
  static LinearModel make_checked(Matrix A, Matrix B, Matrix C, Matrix D);
};

enum class SystemShape { square, flat, thin };

struct RankConditionReport {
  bool holds = false;
  int rank = 0;
  SystemShape shape = SystemShape::square;
};

/// rank([[A-I, B],[C, D]]) == n + p, plus the square/flat/thin
/// classification (p = m / p < m / p > m).
RankConditionReport check_rank_condition(const LinearModel& model);

struct SteadyStatePair {
  Vector x_s;
  Vector u_s;
  bool in_lambda_zs = true;  // target reachable as a contracted equilibrium
};

/// Parametrization of the equilibrium manifold and the contracted steady
/// sets. `basis` spans {(x,u) : (A-I)x + Bu = 0} orthonormally; the
/// particular-solution operator maps y_t to one (x_s, u_s).
class SteadyStateMap {
 public:
  SteadyStateMap(const LinearModel& model, const Polytope& Z, double lambda);

  const LinearModel& model() const { return model_; }
  const Polytope& Z() const { return Z_; }
  double lambda() const { return lambda_; }
  const Matrix& basis() const { return basis_; }

  /// Unique equilibrium for square systems, minimum-norm one for flat
  /// systems. Throws InfeasibleTarget when no equilibrium matches y_t.
  SteadyStatePair steady_state_for_output(const Vector& y_t) const;

  /// Residuals of the equilibrium conditions for an arbitrary pair.
  double equilibrium_residual(const Vector& x_s, const Vector& u_s) const;

  /// Membership (x,u) in lambda*Z_s: equilibrium residual plus the
  /// contracted inequality rows.
  bool in_lambda_zs(const Vector& x_s, const Vector& u_s,
                    double tol = 1e-8) const;
  double lambda_zs_violation(const Vector& x_s, const Vector& u_s) const;

  /// Polytope over the basis coordinate theta: {theta : Hz M theta <= lambda h}.
  Polytope theta_set() const;

 private:
  LinearModel model_;
  Polytope Z_;
  double lambda_;
  Matrix basis_;       // (n+m) x r, orthonormal
  Matrix particular_;  // (n+m) x p, maps y_t to a particular solution
};

/// Set of reachable steady outputs Y_r: image of lambda*Z_s under the
/// output map. Exact for basis coordinates of dimension <= 2 with p <= 2
/// (vertex enumeration + hull); otherwise an outer support-sampled
/// approximation over a fixed direction set.
Polytope reachable_output_set(const SteadyStateMap& map);

using VectorField = std::function<Vector(const Vector& x, const Vector& u)>;
using OutputMap = std::function<Vector(const Vector& x, const Vector& u)>;

struct ContinuousLinearization {
  Matrix A, B, C, D;
};

/// Central finite-difference Jacobians of f and the output map at an
/// equilibrium. Perturbation is `step`, relative when a coordinate
/// magnitude exceeds 1. Throws NonEquilibrium when ||f(x_eq,u_eq)|| > 1e-6.
ContinuousLinearization linearize(const VectorField& f, const OutputMap& out,
                                  const Vector& x_eq, const Vector& u_eq,
                                  double step = 1e-6);

/// Forward Euler: A_d = I + T_s A, B_d = T_s B; C, D unchanged.
LinearModel euler_discretize(const ContinuousLinearization& ct, double T_s);

}  // namespace stmpc
