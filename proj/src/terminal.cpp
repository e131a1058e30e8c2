#include "stmpc/terminal.hpp"

#include <Eigen/Cholesky>

#include "stmpc/errors.hpp"

namespace stmpc {

bool TrackingInvariantSet::contains(const Vector& x, const Vector& x_a,
                                    const Vector& u_a, double tol) const {
  return violation(x, x_a, u_a) <= tol;
}

double TrackingInvariantSet::violation(const Vector& x, const Vector& x_a,
                                       const Vector& u_a) const {
  Vector w(x.size() + x_a.size() + u_a.size());
  w << x, x_a, u_a;
  return halfspaces.max_violation(w);
}

LqrResult compute_lqr_gain(const LinearModel& model, const Matrix& Q,
                           const Matrix& R, double tol, int max_iter) {
  const Matrix& A = model.A;
  const Matrix& B = model.B;
  Matrix P = Q;
  LqrResult out;
  for (int it = 0; it < max_iter; ++it) {
    const Matrix BtP = B.transpose() * P;
    Eigen::LDLT<Matrix> gram(R + BtP * B);
    const Matrix P_next =
        Q + A.transpose() * P * A -
        (BtP * A).transpose() * gram.solve(BtP * A);
    const double diff = (P_next - P).cwiseAbs().maxCoeff();
    P = 0.5 * (P_next + P_next.transpose());
    if (diff <= tol) {
      out.P = P;
      const Matrix BtPfinal = B.transpose() * P;
      out.K = -Eigen::LDLT<Matrix>(R + BtPfinal * B).solve(BtPfinal * A);
      out.iterations = it + 1;
      return out;
    }
  }
  throw RiccatiDivergence("Riccati recursion did not reach a fixed point");
}

Matrix solve_lyapunov(const Matrix& A_K, const Matrix& Q_bar, double tol) {
  if (spectral_radius(A_K) >= 1.0 - 1e-9)
    throw NotSchur("solve_lyapunov: spectral radius >= 1");
  Matrix P = Q_bar;
  Matrix M = A_K;
  for (int it = 0; it < 200; ++it) {
    P = P + M.transpose() * P * M;
    M = M * M;
    const double res = (A_K.transpose() * P * A_K + Q_bar - P).norm();
    if (res <= tol) return 0.5 * (P + P.transpose());
  }
  throw Error("solve_lyapunov: residual did not reach tolerance");
}

TrackingInvariantSet compute_tracking_invariant_set(
    const LinearModel& model, const Matrix& K, const Polytope& Z,
    double lambda, const InvariantSetOptions& opts) {
  const int n = model.n(), m = model.m();
  const Matrix A_K = model.A + model.B * K;
  if (spectral_radius(A_K) >= 1.0 - 1e-9)
    throw NotSchur("invariant set requires A + BK Schur");

  Matrix eq(n, n + m);
  eq.leftCols(n) = model.A - Matrix::Identity(n, n);
  eq.rightCols(m) = model.B;
  const Matrix basis = null_space_basis(eq);  // (n+m) x r
  const int r = static_cast<int>(basis.cols());
  const Matrix Mx = basis.topRows(n);   // x_a = Mx theta
  const Matrix Mu = basis.bottomRows(m);  // u_a = Mu theta

  // Extended autonomous dynamics over w = (x, theta):
  //   x+ = A_K x + B(u_a - K x_a),  theta+ = theta.
  Matrix T = Matrix::Zero(n + r, n + r);
  T.topLeftCorner(n, n) = A_K;
  T.topRightCorner(n, r) = model.B * (Mu - K * Mx);
  T.bottomRightCorner(r, r) = Matrix::Identity(r, r);

  // Stage constraints: (x, K(x - x_a) + u_a) in Z.
  Matrix stage(Z.rows(), n + r);
  {
    Matrix lift_x(n + m, n), lift_t(n + m, r);
    lift_x.topRows(n) = Matrix::Identity(n, n);
    lift_x.bottomRows(m) = K;
    lift_t.topRows(n) = Matrix::Zero(n, r);
    lift_t.bottomRows(m) = Mu - K * Mx;
    stage.leftCols(n) = Z.H * lift_x;
    stage.rightCols(r) = Z.H * lift_t;
  }
  const Vector stage_rhs = Z.h;

  // Steady constraints: (x_a, u_a) in lambda Z_s (theta only; invariant).
  Polytope acc;
  acc.H = Matrix::Zero(Z.rows(), n + r);
  acc.H.rightCols(r) = Z.H * basis;
  acc.h = lambda * Z.h;
  acc.normalize_rows();

  TrackingInvariantSet out;
  out.basis = basis;
  out.truncated = true;

  Matrix propagated = stage;  // stage constraints composed with T^t
  for (int t = 0; t < opts.max_iterations; ++t) {
    Polytope cand;
    cand.H = propagated;
    cand.h = stage_rhs;
    cand.normalize_rows();
    bool added = false;
    for (int i = 0; i < cand.rows(); ++i) {
      // Row is new information iff it can be violated within acc.
      double sup;
      try {
        sup = lp_maximize(acc.H, acc.h, cand.H.row(i).transpose()).value;
      } catch (const LpError&) {
        sup = std::numeric_limits<double>::infinity();  // acc unbounded yet
      }
      if (sup > cand.h(i) + opts.redundancy_tol) {
        acc.H.conservativeResize(acc.rows() + 1, Eigen::NoChange);
        acc.h.conservativeResize(acc.rows());
        acc.H.row(acc.rows() - 1) = cand.H.row(i);
        acc.h(acc.rows() - 1) = cand.h(i);
        added = true;
      }
    }
    out.iterations = t + 1;
    if (!added && t > 0) {
      out.truncated = false;
      break;
    }
    propagated = propagated * T;
  }

  acc.remove_redundant(opts.redundancy_tol);
  out.internal = acc;

  // Public representation over (x, x_a, u_a): theta = basis' (x_a; u_a)
  // on the equilibrium manifold (basis is orthonormal).
  Matrix lift = Matrix::Zero(n + r, 2 * n + m);
  lift.topLeftCorner(n, n) = Matrix::Identity(n, n);
  lift.bottomRightCorner(r, n + m) = basis.transpose();
  out.halfspaces.H = acc.H * lift;
  out.halfspaces.h = acc.h;
  return out;
}

TerminalIngredients terminal_equality_ingredients(const LinearModel& model,
                                                  const Matrix& Q,
                                                  const Matrix& R, int N,
                                                  double lambda) {
  const Matrix Co = controllability_matrix(model.A, model.B, N);
  if (numeric_rank(Co) < model.n())
    throw NotNStepControllable(
        "terminal equality requires full-rank N-step controllability");
  TerminalIngredients ing;
  ing.mode = TerminalMode::terminal_equality;
  ing.lambda = lambda;
  ing.P = Matrix::Zero(model.n(), model.n());
  // K is still synthesized: warm-start candidates append the local law.
  ing.K = compute_lqr_gain(model, Q, R).K;
  return ing;
}

}  // namespace stmpc
