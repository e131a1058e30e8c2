#include "stmpc/ocp.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "stmpc/errors.hpp"

namespace stmpc {

void OcpProblem::check() const {
  model.check_dimensions();
  if (N < 1) throw Error("ocp: horizon must be >= 1");
  if (Q.rows() != model.n() || Q.cols() != model.n())
    throw DimensionError("ocp: Q must be n x n");
  if (R.rows() != model.m() || R.cols() != model.m())
    throw DimensionError("ocp: R must be m x m");
  if (kappa.rows() != model.p() || kappa.cols() != model.p())
    throw DimensionError("ocp: kappa must be p x p");
  if (Z.dim() != model.n() + model.m())
    throw DimensionError("ocp: Z must live in (x,u) space");
  if (x0.size() != model.n()) throw DimensionError("ocp: x0 must be n");
  if (y_t.size() != model.p()) throw DimensionError("ocp: y_t must be p");
  if (!x0.allFinite()) throw Error("ocp: x0 must be finite");
  avoidance.check();
  if (terminal.mode == TerminalMode::invariant_set && !terminal.omega)
    throw Error("ocp: invariant-set mode requires a computed set");
}

void write_trace_csv(const std::vector<TraceRow>& trace,
                     const std::string& path) {
  std::ofstream out(path);
  out << "iteration,merit,step_norm,kkt_residual\n";
  char line[160];
  for (const auto& row : trace) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", row.iteration,
                  row.merit, row.step_norm, row.kkt_residual);
    out << line;
  }
}

OcpAssembler::OcpAssembler(const OcpProblem& problem) : problem_(problem) {
  problem_.check();
  n_ = problem_.model.n();
  m_ = problem_.model.m();
  p_ = problem_.model.p();
  N_ = problem_.N;
  D_ = N_ * m_ + n_ + m_;
  assemble_static();
  set_state(problem_.x0);
  set_target(problem_.y_t);
}

void OcpAssembler::assemble_static() {
  const Matrix& A = problem_.model.A;
  const Matrix& B = problem_.model.B;
  const Matrix& C = problem_.model.C;
  const Matrix& Dmat = problem_.model.D;

  Apow_.assign(N_ + 1, Matrix());
  Apow_[0] = Matrix::Identity(n_, n_);
  for (int j = 1; j <= N_; ++j) Apow_[j] = A * Apow_[j - 1];

  // Rollout map: x(j) = A^j x0 + S_j d.
  S_ = Matrix::Zero((N_ + 1) * n_, D_);
  for (int j = 1; j <= N_; ++j)
    for (int i = 0; i < j; ++i)
      S_.block(j * n_, i * m_, n_, m_) = Apow_[j - 1 - i] * B;

  const int xa_off = N_ * m_;
  const int ua_off = N_ * m_ + n_;

  // Output map rows for y(0..N) and y_a. y(N) uses u_a (local law at the
  // artificial equilibrium).
  T_ = Matrix::Zero((N_ + 2) * p_, D_);
  for (int j = 0; j < N_; ++j) {
    T_.middleRows(j * p_, p_) = C * S_.middleRows(j * n_, n_);
    T_.block(j * p_, j * m_, p_, m_) += Dmat;
  }
  T_.middleRows(N_ * p_, p_) = C * S_.middleRows(N_ * n_, n_);
  T_.block(N_ * p_, ua_off, p_, m_) += Dmat;
  T_.block((N_ + 1) * p_, xa_off, p_, n_) = C;
  T_.block((N_ + 1) * p_, ua_off, p_, m_) = Dmat;

  // Quadratic cost: stage + terminal + offset. M_j = S_j - E_xa maps d to
  // x(j) - x_a (up to the constant A^j x0); U_j maps d to u(j) - u_a.
  Matrix G = Matrix::Zero(D_, D_);
  cx_ = Matrix::Zero(D_, n_);
  for (int j = 0; j < N_; ++j) {
    Matrix Mj = S_.middleRows(j * n_, n_);
    Mj.middleCols(xa_off, n_) -= Matrix::Identity(n_, n_);
    G += Mj.transpose() * problem_.Q * Mj;
    cx_ += Mj.transpose() * problem_.Q * Apow_[j];

    Matrix Uj = Matrix::Zero(m_, D_);
    Uj.middleCols(j * m_, m_) = Matrix::Identity(m_, m_);
    Uj.middleCols(ua_off, m_) -= Matrix::Identity(m_, m_);
    G += Uj.transpose() * problem_.R * Uj;
  }
  {
    Matrix MN = S_.middleRows(N_ * n_, n_);
    MN.middleCols(xa_off, n_) -= Matrix::Identity(n_, n_);
    G += MN.transpose() * problem_.terminal.P * MN;
    cx_ += MN.transpose() * problem_.terminal.P * Apow_[N_];
  }
  Matrix Ya = Matrix::Zero(p_, D_);
  Ya.middleCols(xa_off, n_) = C;
  Ya.middleCols(ua_off, m_) = Dmat;
  G += Ya.transpose() * problem_.kappa * Ya;
  cy_ = -Ya.transpose() * problem_.kappa;
  if (p_ < m_) {
    // Flat systems: deterministic tie-break toward the smallest ||u_a||.
    const double reg = 1e-10 * std::max(1.0, problem_.kappa.cwiseAbs().maxCoeff());
    G.block(ua_off, ua_off, m_, m_) += reg * Matrix::Identity(m_, m_);
  }
  G0_ = 2.0 * G;

  // Equalities: artificial pair on the equilibrium manifold, plus the
  // terminal constraint in terminal-equality mode.
  const int me = n_ + (problem_.terminal.mode == TerminalMode::terminal_equality
                           ? n_
                           : 0);
  E_ = Matrix::Zero(me, D_);
  Ex_ = Matrix::Zero(me, n_);
  e_base_ = Vector::Zero(me);
  E_.block(0, xa_off, n_, n_) = A - Matrix::Identity(n_, n_);
  E_.block(0, ua_off, n_, m_) = B;
  if (problem_.terminal.mode == TerminalMode::terminal_equality) {
    E_.middleRows(n_, n_) = S_.middleRows(N_ * n_, n_);
    E_.block(n_, xa_off, n_, n_) -= Matrix::Identity(n_, n_);
    Ex_.middleRows(n_, n_) = -Apow_[N_];
  }

  // Inequalities: Z along the horizon (j = 0..N-1), lambda Z_s rows on the
  // artificial pair, and the terminal set rows in invariant-set mode.
  const Matrix& Hz = problem_.Z.H;
  const Vector& hz = problem_.Z.h;
  const int qz = static_cast<int>(Hz.rows());
  const Matrix Hz_x = Hz.leftCols(n_);
  const Matrix Hz_u = Hz.rightCols(m_);

  std::vector<int> j0_const_rows;
  std::vector<int> j0_dec_rows;
  for (int r = 0; r < qz; ++r) {
    if (Hz_u.row(r).norm() < 1e-14) j0_const_rows.push_back(r);
    else j0_dec_rows.push_back(r);
  }
  x0_rows_H_ = Matrix(j0_const_rows.size(), n_);
  x0_rows_h_ = Vector(j0_const_rows.size());
  for (size_t r = 0; r < j0_const_rows.size(); ++r) {
    x0_rows_H_.row(r) = Hz_x.row(j0_const_rows[r]);
    x0_rows_h_(r) = hz(j0_const_rows[r]);
  }

  const int omega_rows =
      problem_.terminal.mode == TerminalMode::invariant_set
          ? problem_.terminal.omega->halfspaces.rows()
          : 0;
  const int mi = static_cast<int>(j0_dec_rows.size()) + (N_ - 1) * qz + qz +
                 omega_rows;
  A_ = Matrix::Zero(mi, D_);
  Bx_ = Matrix::Zero(mi, n_);
  b_base_ = Vector::Zero(mi);
  int row = 0;
  for (size_t r = 0; r < j0_dec_rows.size(); ++r, ++row) {
    const int zr = j0_dec_rows[r];
    A_.block(row, 0, 1, m_) = Hz_u.row(zr);
    Bx_.row(row) = -Hz_x.row(zr);
    b_base_(row) = hz(zr);
  }
  for (int j = 1; j < N_; ++j) {
    A_.middleRows(row, qz) = Hz_x * S_.middleRows(j * n_, n_);
    A_.block(row, j * m_, qz, m_) += Hz_u;
    Bx_.middleRows(row, qz) = -Hz_x * Apow_[j];
    b_base_.segment(row, qz) = hz;
    row += qz;
  }
  A_.block(row, xa_off, qz, n_) = Hz_x;
  A_.block(row, ua_off, qz, m_) = Hz_u;
  b_base_.segment(row, qz) = problem_.terminal.lambda * hz;
  row += qz;
  if (omega_rows > 0) {
    const Polytope& om = problem_.terminal.omega->halfspaces;
    const Matrix Ho_x = om.H.leftCols(n_);
    const Matrix Ho_rest = om.H.rightCols(n_ + m_);
    A_.middleRows(row, omega_rows) = Ho_x * S_.middleRows(N_ * n_, n_);
    A_.block(row, xa_off, omega_rows, n_ + m_) += Ho_rest;
    Bx_.middleRows(row, omega_rows) = -Ho_x * Apow_[N_];
    b_base_.segment(row, omega_rows) = om.h;
    row += omega_rows;
  }
}

void OcpAssembler::set_state(const Vector& x0) {
  if (x0.size() != n_) throw DimensionError("set_state: wrong dimension");
  x0_ = x0;
  refresh_rhs();
}

void OcpAssembler::set_target(const Vector& y_t) {
  if (y_t.size() != p_) throw DimensionError("set_target: wrong dimension");
  y_t_ = y_t;
  c0_ = 2.0 * (cx_ * x0_ + cy_ * y_t_);
}

void OcpAssembler::set_avoidance(const AvoidanceSpec& spec) {
  spec.check();
  problem_.avoidance = spec;
}

void OcpAssembler::refresh_rhs() {
  e_ = e_base_ + Ex_ * x0_;
  b_ = b_base_ + Bx_ * x0_;
  if (y_t_.size() == p_) c0_ = 2.0 * (cx_ * x0_ + cy_ * y_t_);
}

Vector OcpAssembler::stack_decision(const std::vector<Vector>& u_seq,
                                    const Vector& x_a,
                                    const Vector& u_a) const {
  Vector d(D_);
  for (int j = 0; j < N_; ++j) d.segment(j * m_, m_) = u_seq[j];
  d.segment(N_ * m_, n_) = x_a;
  d.segment(N_ * m_ + n_, m_) = u_a;
  return d;
}

Vector OcpAssembler::input_at(const Vector& d, int j) const {
  return d.segment(j * m_, m_);
}
Vector OcpAssembler::artificial_state(const Vector& d) const {
  return d.segment(N_ * m_, n_);
}
Vector OcpAssembler::artificial_input(const Vector& d) const {
  return d.segment(N_ * m_ + n_, m_);
}

void OcpAssembler::rollout(const Vector& d, std::vector<Vector>& x_seq,
                           std::vector<Vector>& y_seq) const {
  const Matrix& A = problem_.model.A;
  const Matrix& B = problem_.model.B;
  const Matrix& C = problem_.model.C;
  const Matrix& Dm = problem_.model.D;
  x_seq.assign(N_ + 1, Vector());
  y_seq.assign(N_ + 1, Vector());
  x_seq[0] = x0_;
  for (int j = 0; j < N_; ++j) {
    const Vector uj = input_at(d, j);
    y_seq[j] = C * x_seq[j] + Dm * uj;
    x_seq[j + 1] = A * x_seq[j] + B * uj;
  }
  y_seq[N_] = C * x_seq[N_] + Dm * artificial_input(d);
}

double OcpAssembler::penalty_total(const std::vector<Vector>& y_seq,
                                   const Vector& y_a) const {
  return avoidance_cost(problem_.avoidance, y_seq, y_a);
}

CostParts OcpAssembler::eval_cost(const Vector& d) const {
  std::vector<Vector> x_seq, y_seq;
  rollout(d, x_seq, y_seq);
  const Vector x_a = artificial_state(d);
  const Vector u_a = artificial_input(d);
  const Vector y_a = problem_.model.C * x_a + problem_.model.D * u_a;

  CostParts parts;
  for (int j = 0; j < N_; ++j) {
    const Vector dx = x_seq[j] - x_a;
    const Vector du = input_at(d, j) - u_a;
    parts.dynamic += dx.dot(problem_.Q * dx) + du.dot(problem_.R * du);
  }
  const Vector dN = x_seq[N_] - x_a;
  parts.dynamic += dN.dot(problem_.terminal.P * dN);
  const Vector dy = y_a - y_t_;
  parts.offset = dy.dot(problem_.kappa * dy);
  parts.avoidance = penalty_total(y_seq, y_a);
  parts.total = parts.dynamic + parts.offset + parts.avoidance;
  return parts;
}

Vector OcpAssembler::eval_gradient(const Vector& d) const {
  Vector grad = G0_ * d + c0_;
  if (!problem_.avoidance.empty()) {
    std::vector<Vector> x_seq, y_seq;
    rollout(d, x_seq, y_seq);
    const Vector y_a =
        problem_.model.C * artificial_state(d) +
        problem_.model.D * artificial_input(d);
    for (size_t i = 0; i < problem_.avoidance.regions.size(); ++i) {
      const double mu = problem_.avoidance.mu[i];
      for (int j = 0; j <= N_ + 1; ++j) {
        const Vector& y = (j <= N_) ? y_seq[j] : y_a;
        const PenaltyResidual r =
            penalty_residual(problem_.avoidance.regions[i], y);
        if (r.rho > 0.0)
          grad += (2.0 * mu * r.rho) *
                  (T_.middleRows(j * p_, p_).transpose() * r.jac);
      }
    }
  }
  return grad;
}

Matrix OcpAssembler::gauss_newton_hessian(const Vector& d) const {
  Matrix H = G0_;
  if (!problem_.avoidance.empty()) {
    std::vector<Vector> x_seq, y_seq;
    rollout(d, x_seq, y_seq);
    const Vector y_a =
        problem_.model.C * artificial_state(d) +
        problem_.model.D * artificial_input(d);
    for (size_t i = 0; i < problem_.avoidance.regions.size(); ++i) {
      const double mu = problem_.avoidance.mu[i];
      for (int j = 0; j <= N_ + 1; ++j) {
        const Vector& y = (j <= N_) ? y_seq[j] : y_a;
        const PenaltyResidual r =
            penalty_residual(problem_.avoidance.regions[i], y);
        if (r.rho > 0.0 || r.jac.norm() > 0.0) {
          const Vector Jd = T_.middleRows(j * p_, p_).transpose() * r.jac;
          H += (2.0 * mu) * (Jd * Jd.transpose());
        }
      }
    }
  }
  return H;
}

Vector OcpAssembler::constraint_residuals(const Vector& d) const {
  Vector res(E_.rows() + A_.rows());
  if (E_.rows() > 0) res.head(E_.rows()) = (E_ * d - e_).cwiseAbs();
  if (A_.rows() > 0)
    res.tail(A_.rows()) = (A_ * d - b_).cwiseMax(0.0);
  return res;
}

double OcpAssembler::max_violation(const Vector& d) const {
  const Vector r = constraint_residuals(d);
  return r.size() > 0 ? r.maxCoeff() : 0.0;
}

double OcpAssembler::x0_violation() const {
  if (x0_rows_H_.rows() == 0) return 0.0;
  return (x0_rows_H_ * x0_ - x0_rows_h_).maxCoeff();
}

std::optional<Vector> OcpAssembler::hold_candidate() const {
  // u that keeps x0 stationary, if any.
  const Matrix& A = problem_.model.A;
  const Matrix& B = problem_.model.B;
  const Vector rhs = x0_ - A * x0_;
  const Vector u_hold = pinv(B) * rhs;
  if ((A * x0_ + B * u_hold - x0_).norm() > 1e-8) return std::nullopt;
  std::vector<Vector> u_seq(N_, u_hold);
  const Vector d = stack_decision(u_seq, x0_, u_hold);
  if (max_violation(d) <= 1e-9) return d;
  return std::nullopt;
}

std::optional<Vector> OcpAssembler::steer_candidate(
    const Vector* theta_hint) const {
  const Matrix& basis = problem_.steady.basis();
  const int r = static_cast<int>(basis.cols());
  Vector theta;
  if (theta_hint) {
    theta = *theta_hint;
  } else {
    Vector z(n_ + m_);
    z << x0_, Vector::Zero(m_);
    theta = basis.transpose() * z;
  }
  // Shrink toward the origin until the contracted steady rows hold.
  const Polytope th = problem_.steady.theta_set();
  const Vector Ht = th.H * theta;
  double scale = 1.0;
  for (int i = 0; i < th.rows(); ++i)
    if (Ht(i) > th.h(i)) scale = std::min(scale, 0.98 * th.h(i) / Ht(i));
  theta *= std::max(0.0, scale);
  (void)r;

  const Vector x_a = basis.topRows(n_) * theta;
  const Vector u_a = basis.bottomRows(m_) * theta;
  const Matrix& K = problem_.terminal.K;
  std::vector<Vector> u_seq(N_);
  Vector x = x0_;
  for (int j = 0; j < N_; ++j) {
    u_seq[j] = K * (x - x_a) + u_a;
    x = problem_.model.A * x + problem_.model.B * u_seq[j];
  }
  const Vector d = stack_decision(u_seq, x_a, u_a);
  if (max_violation(d) <= 1e-9) return d;
  return std::nullopt;
}

std::optional<Vector> OcpAssembler::find_feasible() const {
  if (auto d = hold_candidate()) return d;
  if (auto d = steer_candidate(nullptr)) return d;
  Vector hint = Vector::Zero(D_);
  if (auto d0 = steer_candidate(nullptr)) hint = *d0;
  const Phase1Result ph = qp_phase1(E_, e_, A_, b_, &hint, 1e-7);
  if (ph.feasible) return ph.x;
  return std::nullopt;
}

OcpSolution OcpAssembler::package(const Vector& d, SolveStatus status) const {
  OcpSolution sol;
  sol.status = status;
  sol.decision = d;
  rollout(d, sol.x_seq, sol.y_seq);
  sol.u_seq.resize(N_);
  for (int j = 0; j < N_; ++j) sol.u_seq[j] = input_at(d, j);
  sol.x_a = artificial_state(d);
  sol.u_a = artificial_input(d);
  sol.y_a = problem_.model.C * sol.x_a + problem_.model.D * sol.u_a;
  sol.cost = eval_cost(d);
  sol.constraint_violation = max_violation(d);
  return sol;
}

Vector shifted_candidate(OcpAssembler& assembler, const OcpSolution& previous,
                         const Vector& new_x0, double tol,
                         double* violation_out) {
  const OcpProblem& pb = assembler.problem();
  const int N = pb.N;
  std::vector<Vector> u_seq(N);
  for (int j = 0; j + 1 < N; ++j) u_seq[j] = previous.u_seq[j + 1];
  u_seq[N - 1] = pb.terminal.K * (previous.x_seq[N] - previous.x_a) +
                 previous.u_a;
  const Vector d =
      assembler.stack_decision(u_seq, previous.x_a, previous.u_a);
  assembler.set_state(new_x0);
  const double viol = assembler.max_violation(d);
  if (violation_out) *violation_out = viol;
  if (viol > tol)
    throw PlantModelMismatch(
        "shifted candidate infeasible at the provided state (violation " +
        std::to_string(viol) + ")");
  return d;
}

namespace {

struct SqpOutcome {
  Vector d;
  SolveStatus status = SolveStatus::converged;
  int majors = 0;
  int qp_iters = 0;
  double kkt = 0.0;
  std::vector<int> working_set;
  std::vector<TraceRow> trace;
};

SqpOutcome run_sqp(OcpAssembler& asmb, const Vector& d_start,
                   const std::vector<int>* warm_ws, const SqpOptions& opt) {
  SqpOutcome out;
  out.status = SolveStatus::max_iter;
  Vector d = d_start;
  if (opt.max_major_iterations <= 0) {
    // No iterations allowed: the candidate is all the solver can offer.
    out.status = SolveStatus::fallback_candidate;
    out.d = d;
    return out;
  }
  double merit = asmb.eval_cost(d).total;
  bool made_progress = false;
  int stall = 0;
  std::vector<int> ws = warm_ws ? *warm_ws : std::vector<int>();
  // The QP is warm-started at the previous major's optimal point (always
  // feasible: the constraint geometry never changes between majors), where
  // the carried working set is genuinely active. Starting at the line-
  // searched iterate instead would re-discover the active face one row per
  // iteration.
  Vector qp_start = d;

  for (int major = 0; major < opt.max_major_iterations; ++major) {
    out.majors = major + 1;
    const Vector grad = asmb.eval_gradient(d);
    Matrix H = asmb.gauss_newton_hessian(d);
    const double reg = 1e-8 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
    H.diagonal().array() += reg;

    DenseQp qp;
    qp.G = H;
    qp.c = grad - H * d;  // QP in the full variable: min over d+p directly
    qp.E = asmb.eq_matrix();
    qp.e = asmb.eq_rhs();
    qp.A = asmb.ineq_matrix();
    qp.b = asmb.ineq_rhs();

    QpOptions qopt;
    const QpResult qres =
        solve_qp(qp, qp_start, qopt, ws.empty() ? nullptr : &ws);
    out.qp_iters += qres.iterations;
    if (getenv("STMPC_QP_DEBUG"))
      fprintf(stderr, "  major %d: qp_iters=%d ws_in=%zu ws_out=%zu status=%d\n",
              major, qres.iterations, ws.size(), qres.working_set.size(),
              (int)qres.status);
    if (qres.status == QpStatus::optimal) {
      ws = qres.working_set;
      qp_start = qres.x;
    }
    if (qres.status != QpStatus::optimal &&
        qres.status != QpStatus::max_iterations) {
      out.status = made_progress ? SolveStatus::max_iter
                                 : SolveStatus::fallback_candidate;
      break;
    }
    const Vector p = qres.x - d;
    const double step_norm = p.cwiseAbs().maxCoeff();

    // KKT residual of the nonlinear problem at d with the QP multipliers.
    Vector kkt_vec = grad;
    if (qp.E.rows() > 0) kkt_vec += qp.E.transpose() * qres.eq_duals;
    if (qp.A.rows() > 0) kkt_vec += qp.A.transpose() * qres.ineq_duals;
    const double kkt = kkt_vec.cwiseAbs().maxCoeff() + step_norm * reg;
    out.kkt = kkt;
    out.working_set = qres.working_set;

    if (opt.keep_trace)
      out.trace.push_back({major, merit, step_norm, kkt});

    if (step_norm <= opt.step_tol * (1.0 + d.cwiseAbs().maxCoeff()) ||
        kkt <= opt.kkt_tol) {
      out.status = SolveStatus::converged;
      break;
    }

    // Backtracking line search on the exact objective (the penalties are
    // part of it, so it is its own merit function).
    const double directional = grad.dot(p);
    double alpha = 1.0;
    bool accepted = false;
    double merit_before = merit;
    for (int ls = 0; ls < 40; ++ls) {
      const Vector cand = d + alpha * p;
      const double val = asmb.eval_cost(cand).total;
      if (val <= merit + 1e-4 * alpha * directional ||
          (directional >= 0.0 && val <= merit)) {
        d = cand;
        merit = val;
        accepted = true;
        made_progress = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      out.status = SolveStatus::converged;  // no descent left at tolerance
      break;
    }
    // The taken step is what the stopping rule measures; stiff penalty
    // terrain can keep proposing large p while the line search pins the
    // iterate in place.
    const double taken = alpha * step_norm;
    const double improvement = merit_before - merit;
    if (taken <= opt.step_tol * (1.0 + d.cwiseAbs().maxCoeff())) ++stall;
    else if (improvement <= 1e-12 * (1.0 + std::abs(merit))) ++stall;
    else stall = 0;
    if (stall >= 2) {
      out.status = SolveStatus::converged;
      break;
    }
  }
  out.d = d;
  return out;
}

}  // namespace

OcpSolution solve(OcpAssembler& assembler, const Vector* warm_decision,
                  const std::vector<int>* warm_working_set) {
  const OcpProblem& pb = assembler.problem();
  const SqpOptions& opt = pb.options;

  Vector d0;
  if (warm_decision) {
    if (assembler.max_violation(*warm_decision) > opt.constraint_tol)
      throw Error("solve: provided warm start is infeasible");
    d0 = *warm_decision;
  } else {
    auto d = assembler.find_feasible();
    if (!d)
      throw InfeasibleProblem(
          "no feasible point: x0 is outside the N-step domain");
    d0 = *d;
  }
  const double candidate_cost = assembler.eval_cost(d0).total;

  SqpOutcome best = run_sqp(assembler, d0, warm_working_set, opt);

  if (opt.restarts > 0) {
    std::mt19937_64 rng(opt.seed);
    const Polytope th = pb.steady.theta_set();
    for (int rsi = 0; rsi < opt.restarts; ++rsi) {
      Vector theta;
      try {
        theta = th.sample_interior(rng);
      } catch (const LpError&) {
        break;
      }
      auto cand = assembler.steer_candidate(&theta);
      if (!cand) continue;
      SqpOutcome alt = run_sqp(assembler, *cand, nullptr, opt);
      if (assembler.eval_cost(alt.d).total <
              assembler.eval_cost(best.d).total &&
          assembler.max_violation(alt.d) <= opt.constraint_tol) {
        alt.qp_iters += best.qp_iters;
        alt.majors += best.majors;
        best = alt;
      }
    }
  }

  // Never return worse than the candidate; feasibility is never lost.
  Vector d_final = best.d;
  SolveStatus status = best.status;
  const double final_cost = assembler.eval_cost(d_final).total;
  if (assembler.max_violation(d_final) > opt.constraint_tol ||
      final_cost > candidate_cost + 1e-12 * (1.0 + std::abs(candidate_cost))) {
    d_final = d0;
    status = SolveStatus::fallback_candidate;
  }

  OcpSolution sol = assembler.package(d_final, status);
  sol.sqp_iterations = best.majors;
  sol.qp_iterations = best.qp_iters;
  sol.kkt_residual = best.kkt;
  sol.working_set = best.working_set;
  sol.trace = std::move(best.trace);
  return sol;
}

OcpSolution solve(const OcpProblem& problem, const Vector* warm_decision) {
  OcpAssembler assembler(problem);
  return solve(assembler, warm_decision);
}

}  // namespace stmpc
