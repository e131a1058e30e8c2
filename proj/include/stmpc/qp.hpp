#pragma once

#include <vector>

#include "stmpc/linalg.hpp"

namespace stmpc {

/// min 0.5 x'Gx + c'x  s.t.  E x = e,  A x <= b, with G positive definite.
struct DenseQp {
  Matrix G;
  Vector c;
  Matrix E;
  Vector e;
  Matrix A;
  Vector b;
};

enum class QpStatus { optimal, max_iterations, infeasible_start, failed };

struct QpResult {
  QpStatus status = QpStatus::failed;
  Vector x;
  Vector eq_duals;
  Vector ineq_duals;  // >= 0, nonzero only on the working set
  std::vector<int> working_set;
  int iterations = 0;
};

struct QpOptions {
  int max_iterations = 0;  // 0: scale with problem size
  double feas_tol = 1e-8;
  double step_tol = 1e-12;
  double mult_tol = 1e-9;
  double kkt_reg = 1e-11;  // proximal term on multipliers in the Schur system
};

/// Primal active-set method. `x0` must be feasible; iterates stay
/// feasible. `warm_working_set` seeds the working set (rows need not be
/// active at x0; inactive rows are pruned before optimality is declared).
QpResult solve_qp(const DenseQp& qp, const Vector& x0,
                  const QpOptions& opts = {},
                  const std::vector<int>* warm_working_set = nullptr);

struct Phase1Result {
  bool feasible = false;
  Vector x;
  double max_violation = 0.0;
};

/// Finds a point satisfying E x = e, A x <= b (to tolerance) by minimizing
/// a single elastic bound on the inequality violations. `hint` seeds the
/// search; equalities are restored by a least-squares correction first.
Phase1Result qp_phase1(const Matrix& E, const Vector& e, const Matrix& A,
                       const Vector& b, const Vector* hint = nullptr,
                       double tol = 1e-7);

}  // namespace stmpc
