#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stmpc/avoidance.hpp"
#include "stmpc/model.hpp"
#include "stmpc/qp.hpp"
#include "stmpc/terminal.hpp"

namespace stmpc {

struct SqpOptions {
  int max_major_iterations = 100;
  double step_tol = 1e-8;
  double kkt_tol = 1e-6;
  double constraint_tol = 1e-6;
  int restarts = 0;  // extra randomized restarts (multistart)
  std::uint64_t seed = 1;
  bool keep_trace = false;
};

/// Finite-horizon tracking problem with artificial references and
/// penalty-based avoidance.
struct OcpProblem {
  LinearModel model;
  int N = 1;
  Matrix Q, R;
  TerminalIngredients terminal;
  Polytope Z;
  SteadyStateMap steady;
  Matrix kappa;  // offset weight, p x p positive definite
  AvoidanceSpec avoidance;
  Vector x0;
  Vector y_t;
  SqpOptions options;

  void check() const;
};

struct CostParts {
  double total = 0.0;
  double dynamic = 0.0;
  double offset = 0.0;
  double avoidance = 0.0;
};

enum class SolveStatus { converged, max_iter, fallback_candidate };

struct TraceRow {
  int iteration = 0;
  double merit = 0.0;
  double step_norm = 0.0;
  double kkt_residual = 0.0;
};

struct OcpSolution {
  std::vector<Vector> u_seq;  // u(0..N-1)
  std::vector<Vector> x_seq;  // x(0..N)
  std::vector<Vector> y_seq;  // y(0..N)
  Vector x_a, u_a, y_a;
  CostParts cost;
  SolveStatus status = SolveStatus::converged;
  int sqp_iterations = 0;
  int qp_iterations = 0;
  double kkt_residual = 0.0;
  double constraint_violation = 0.0;
  Vector decision;  // stacked (u_seq, x_a, u_a) for warm starts
  std::vector<int> working_set;
  std::vector<TraceRow> trace;
};

void write_trace_csv(const std::vector<TraceRow>& trace,
                     const std::string& path);

/// Dense single-shooting transcription. States are eliminated by rollout;
/// the decision vector is [u(0); ...; u(N-1); x_a; u_a]. Constraint
/// matrices are independent of (x0, y_t); only right-hand sides move
/// between steps, so one assembler is reused across a closed loop.
class OcpAssembler {
 public:
  explicit OcpAssembler(const OcpProblem& problem);

  void set_state(const Vector& x0);
  void set_target(const Vector& y_t);
  void set_avoidance(const AvoidanceSpec& spec);

  int decision_dim() const { return D_; }
  const OcpProblem& problem() const { return problem_; }

  Vector stack_decision(const std::vector<Vector>& u_seq, const Vector& x_a,
                        const Vector& u_a) const;
  Vector input_at(const Vector& d, int j) const;
  Vector artificial_state(const Vector& d) const;
  Vector artificial_input(const Vector& d) const;

  void rollout(const Vector& d, std::vector<Vector>& x_seq,
               std::vector<Vector>& y_seq) const;

  CostParts eval_cost(const Vector& d) const;
  Vector eval_gradient(const Vector& d) const;
  Matrix gauss_newton_hessian(const Vector& d) const;

  /// Stacked residuals: equality rows as |E d - e|, inequality rows as
  /// max(0, A d - b). Never depends on y_t.
  Vector constraint_residuals(const Vector& d) const;
  double max_violation(const Vector& d) const;

  /// Violation of state-only constraints on x0 (rows of Z at j=0 that do
  /// not touch the decision variables).
  double x0_violation() const;

  const Matrix& eq_matrix() const { return E_; }
  const Vector& eq_rhs() const { return e_; }
  const Matrix& ineq_matrix() const { return A_; }
  const Vector& ineq_rhs() const { return b_; }
  const Matrix& quadratic_term() const { return G0_; }
  const Vector& linear_term() const { return c0_; }

  /// Candidate that parks the plant at x0 when x0 is (numerically) an
  /// equilibrium state and the hold decision is admissible.
  std::optional<Vector> hold_candidate() const;

  /// Candidate steering with the local law toward an admissible
  /// equilibrium near x0 (or a supplied theta coordinate).
  std::optional<Vector> steer_candidate(const Vector* theta_hint) const;

  /// Any feasible decision: hold, steer, then an elastic phase-1 search.
  std::optional<Vector> find_feasible() const;

  OcpSolution package(const Vector& d, SolveStatus status) const;

 private:
  void assemble_static();
  void refresh_rhs();
  double penalty_total(const std::vector<Vector>& y_seq,
                       const Vector& y_a) const;

  OcpProblem problem_;
  int n_, m_, p_, N_, D_;
  std::vector<Matrix> Apow_;  // A^j, j = 0..N
  Matrix S_;                  // (N+1)n x D rollout map
  Matrix T_;                  // (N+2)p x D output map (y(0..N), y_a)
  Matrix G0_;                 // quadratic cost term (x0-independent)
  Matrix cx_, cy_;            // c0 = 2 (cx x0 + cy y_t)
  Vector c0_;
  Matrix E_;                  // equality rows (static)
  Matrix Ex_;                 // e = e_base + Ex x0
  Vector e_base_, e_;
  Matrix A_;                  // inequality rows (static)
  Matrix Bx_;                 // b = b_base + Bx x0
  Vector b_base_, b_;
  Matrix x0_rows_H_;          // state-only rows at j=0
  Vector x0_rows_h_;
  Vector x0_, y_t_;
};

/// Shifted feasible candidate: tail of the previous optimal sequence plus
/// one application of the terminal law, artificial pair unchanged.
/// `new_x0` must be the model successor of the previous solve's state;
/// throws PlantModelMismatch when the candidate violates constraints by
/// more than `tol` at new_x0.
Vector shifted_candidate(OcpAssembler& assembler, const OcpSolution& previous,
                         const Vector& new_x0, double tol = 1e-6,
                         double* violation_out = nullptr);

/// SQP with Gauss-Newton penalty curvature and hard affine constraints.
/// Falls back to the warm-start candidate when no feasible-and-no-worse
/// point is produced. Throws InfeasibleProblem when no feasible point
/// exists at all.
OcpSolution solve(OcpAssembler& assembler,
                  const Vector* warm_decision = nullptr,
                  const std::vector<int>* warm_working_set = nullptr);

/// Convenience entry assembling the problem once.
OcpSolution solve(const OcpProblem& problem,
                  const Vector* warm_decision = nullptr);

}  // namespace stmpc
