#include <doctest.h>

#include <fstream>
#include <random>

#include "stmpc/errors.hpp"
#include "stmpc/ocp.hpp"
#include "support/admm_qp.hpp"
#include "support/fixtures.hpp"

using namespace stmpc;
using namespace test_fixtures;

namespace {

// Brute force for the N=2 double integrator: grid over the two scalar
// inputs, fine inner grid over the single steady-manifold coordinate.
double brute_force_best_cost(OcpAssembler& asmb, int grid_per_axis) {
  const OcpProblem& pb = asmb.problem();
  REQUIRE(pb.N == 2);
  REQUIRE(pb.model.m() == 1);
  double best = std::numeric_limits<double>::infinity();
  const Matrix basis = pb.steady.basis();
  REQUIRE(basis.cols() == 1);
  for (int i = 0; i < grid_per_axis; ++i) {
    for (int j = 0; j < grid_per_axis; ++j) {
      const double u0 = -1.0 + 2.0 * i / (grid_per_axis - 1);
      const double u1 = -1.0 + 2.0 * j / (grid_per_axis - 1);
      for (int t = 0; t <= 400; ++t) {
        const double theta = -5.05 + 10.1 * t / 400.0;
        std::vector<Vector> u_seq{Vector::Constant(1, u0),
                                  Vector::Constant(1, u1)};
        const Vector x_a = basis.topRows(2) * Vector::Constant(1, theta);
        const Vector u_a = basis.bottomRows(1) * Vector::Constant(1, theta);
        const Vector d = asmb.stack_decision(u_seq, x_a, u_a);
        if (asmb.max_violation(d) > 1e-9) continue;
        best = std::min(best, asmb.eval_cost(d).total);
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("cost vanishes at the artificial fixed point") {
  OcpProblem pb = di_problem();
  const auto ss = pb.steady.steady_state_for_output(Vector::Constant(1, 2.0));
  pb.x0 = ss.x_s;
  pb.y_t = Vector::Constant(1, 2.0);
  OcpAssembler asmb(pb);
  std::vector<Vector> u_seq(pb.N, ss.u_s);
  const Vector d = asmb.stack_decision(u_seq, ss.x_s, ss.u_s);
  const CostParts cost = asmb.eval_cost(d);
  CHECK(cost.total == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(asmb.max_violation(d) <= 1e-10);
  CHECK(asmb.eval_gradient(d).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("only the offset term survives for an unreachable target") {
  OcpProblem pb = di_problem();
  const Vector y_r = Vector::Constant(1, 4.0);
  const auto ss = pb.steady.steady_state_for_output(y_r);
  pb.x0 = ss.x_s;
  pb.y_t = Vector::Constant(1, 7.0);  // outside the reachable interval
  OcpAssembler asmb(pb);
  std::vector<Vector> u_seq(pb.N, ss.u_s);
  const Vector d = asmb.stack_decision(u_seq, ss.x_s, ss.u_s);
  const CostParts cost = asmb.eval_cost(d);
  CHECK(cost.dynamic == doctest::Approx(0.0));
  CHECK(cost.avoidance == doctest::Approx(0.0));
  CHECK(cost.offset == doctest::Approx(100.0 * 9.0));
  CHECK(cost.total == doctest::Approx(cost.offset));
}

TEST_CASE("hand-computed single-step scalar cost") {
  LinearModel model;
  model.A = Matrix::Constant(1, 1, 0.5);
  model.B = Matrix::Ones(1, 1);
  model.C = Matrix::Ones(1, 1);
  model.D = Matrix::Zero(1, 1);
  const Polytope Z =
      Polytope::box(Vector::Constant(2, -10.0), Vector::Constant(2, 10.0));
  TerminalIngredients terminal = terminal_equality_ingredients(
      model, Matrix::Identity(1, 1), Matrix::Identity(1, 1), 1, 0.9);
  OcpProblem pb{model,
                1,
                2.0 * Matrix::Identity(1, 1),
                3.0 * Matrix::Identity(1, 1),
                terminal,
                Z,
                SteadyStateMap(model, Z, 0.9),
                5.0 * Matrix::Identity(1, 1),
                AvoidanceSpec{},
                Vector::Constant(1, 1.0),
                Vector::Constant(1, 0.25),
                SqpOptions{}};
  OcpAssembler asmb(pb);
  // u(0) = 0.3, x_a = 0.8, u_a = 0.4 (so x_a = A x_a + B u_a holds).
  std::vector<Vector> u_seq{Vector::Constant(1, 0.3)};
  const Vector d = asmb.stack_decision(u_seq, Vector::Constant(1, 0.8),
                                       Vector::Constant(1, 0.4));
  // x(1) = 0.5 + 0.3 = 0.8; dynamic = 2*0.2^2 + 3*0.1^2 = 0.11 (P = 0);
  // offset = 5*(0.8-0.25)^2 = 1.5125.
  const CostParts cost = asmb.eval_cost(d);
  CHECK(cost.dynamic == doctest::Approx(0.11).epsilon(1e-12));
  CHECK(cost.offset == doctest::Approx(1.5125).epsilon(1e-12));
  CHECK(cost.total == doctest::Approx(1.6225).epsilon(1e-12));
  CHECK(asmb.max_violation(d) <= 1e-12);
}

TEST_CASE("quadratic-term assembly matches the rollout cost") {
  OcpProblem pb = di_problem({.N = 4});
  pb.x0 << 1.0, -0.4;
  pb.y_t = Vector::Constant(1, 2.0);
  OcpAssembler asmb(pb);
  std::mt19937_64 rng(123);
  std::normal_distribution<double> gauss(0.0, 0.3);
  const double at_zero =
      asmb.eval_cost(Vector::Zero(asmb.decision_dim())).total;
  for (int trial = 0; trial < 50; ++trial) {
    Vector d(asmb.decision_dim());
    for (int i = 0; i < d.size(); ++i) d(i) = gauss(rng);
    const double via_rollout = asmb.eval_cost(d).total;
    const double via_quadratic = 0.5 * d.dot(asmb.quadratic_term() * d) +
                                 asmb.linear_term().dot(d) + at_zero;
    CHECK(via_rollout == doctest::Approx(via_quadratic).epsilon(1e-10));
  }
}

TEST_CASE("gradient matches central finite differences") {
  OcpProblem pb = di_problem({.N = 3});
  pb.x0 << 0.5, 0.2;
  pb.y_t = Vector::Constant(1, 1.5);
  pb.avoidance.regions.push_back(output_sphere(1.0, 0.6));
  pb.avoidance.mu.push_back(50.0);
  OcpAssembler asmb(pb);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 0.5);
  int checked = 0;
  while (checked < 100) {
    Vector d(asmb.decision_dim());
    for (int i = 0; i < d.size(); ++i) d(i) = gauss(rng);
    std::vector<Vector> xs, ys;
    asmb.rollout(d, xs, ys);
    bool near_kink = false;
    for (const auto& y : ys)
      if (std::abs(penalty_residual(pb.avoidance.regions[0], y).rho) < 1e-3)
        near_kink = true;
    if (near_kink) continue;
    ++checked;

    const Vector grad = asmb.eval_gradient(d);
    Vector fd(d.size());
    for (int i = 0; i < d.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(d(i)));
      Vector dp = d, dm = d;
      dp(i) += h;
      dm(i) -= h;
      fd(i) =
          (asmb.eval_cost(dp).total - asmb.eval_cost(dm).total) / (2.0 * h);
    }
    const double scale = std::max(1.0, grad.cwiseAbs().maxCoeff());
    CHECK((grad - fd).cwiseAbs().maxCoeff() / scale <= 1e-5);
  }
}

TEST_CASE("constraint residuals never depend on the target") {
  OcpProblem pb = di_problem({.N = 3});
  pb.x0 << 1.0, 0.0;
  pb.y_t = Vector::Constant(1, 2.0);
  OcpAssembler asmb(pb);
  const OcpSolution sol = solve(asmb);
  const Vector before = asmb.constraint_residuals(sol.decision);
  asmb.set_target(Vector::Constant(1, -3.5));
  const Vector after = asmb.constraint_residuals(sol.decision);
  REQUIRE(before.size() == after.size());
  for (int i = 0; i < before.size(); ++i) CHECK(before(i) == after(i));
}

TEST_CASE("solve returns the fixed point at equilibrium") {
  OcpProblem pb = di_problem();
  const Vector y = Vector::Constant(1, 2.0);
  const auto ss = pb.steady.steady_state_for_output(y);
  pb.x0 = ss.x_s;
  pb.y_t = y;
  const OcpSolution sol = solve(pb);
  CHECK(sol.cost.total <= 1e-10);
  CHECK((sol.x_a - ss.x_s).norm() <= 1e-5);
  CHECK(sol.status == SolveStatus::converged);
}

TEST_CASE("obstacle-free solve matches the dense QP oracle") {
  OcpProblem pb = di_problem();
  pb.x0 << -2.0, 0.5;
  pb.y_t = Vector::Constant(1, 3.0);
  OcpAssembler asmb(pb);
  const OcpSolution sol = solve(asmb);
  REQUIRE(sol.constraint_violation <= 1e-8);

  const Matrix& E = asmb.eq_matrix();
  const Matrix& A = asmb.ineq_matrix();
  Matrix Ao(E.rows() + A.rows(), asmb.decision_dim());
  Ao << E, A;
  Vector lo = Vector::Constant(Ao.rows(), -1e30);
  Vector hi(Ao.rows());
  lo.head(E.rows()) = asmb.eq_rhs();
  hi.head(E.rows()) = asmb.eq_rhs();
  hi.tail(A.rows()) = asmb.ineq_rhs();
  const auto oracle = test_oracle::solve_admm_qp(
      asmb.quadratic_term(), asmb.linear_term(), Ao, lo, hi, 1e-11);
  REQUIRE(oracle.converged);
  const double oracle_cost = asmb.eval_cost(oracle.x).total;
  CHECK(std::abs(sol.cost.total - oracle_cost) <= 1e-6);
}

TEST_CASE("solve beats the brute-force input grid") {
  OcpProblem pb = di_problem();
  pb.x0 << -2.0, 0.5;
  pb.y_t = Vector::Constant(1, 3.0);
  OcpAssembler asmb(pb);
  const OcpSolution sol = solve(asmb);
  const double grid_best = brute_force_best_cost(asmb, 41);
  CHECK(sol.cost.total <= grid_best + 1e-3);
}

TEST_CASE("penalized solve still beats the grid") {
  OcpProblem pb = di_problem();
  pb.x0 << -2.0, 0.0;
  pb.y_t = Vector::Constant(1, 3.0);
  pb.avoidance.regions.push_back(output_sphere(0.5, 0.4));
  pb.avoidance.mu.push_back(1e4);
  OcpAssembler asmb(pb);
  const OcpSolution sol = solve(asmb);
  REQUIRE(sol.constraint_violation <= 1e-8);
  const double grid_best = brute_force_best_cost(asmb, 41);
  CHECK(sol.cost.total <= grid_best + 1e-3);
}

TEST_CASE("shifted candidate is exactly feasible at the model successor") {
  OcpProblem pb = di_problem({.N = 2});
  pb.x0 << -2.0, 0.5;
  pb.y_t = Vector::Constant(1, 3.0);
  OcpAssembler asmb(pb);
  const OcpSolution sol = solve(asmb);
  const Vector x_next = pb.model.A * pb.x0 + pb.model.B * sol.u_seq[0];
  double viol = 0.0;
  const Vector cand = shifted_candidate(asmb, sol, x_next, 1e-6, &viol);
  CHECK(viol <= 1e-10);
  CHECK(asmb.max_violation(cand) <= 1e-10);

  OcpProblem eq = di_problem({.N = 2});
  const auto ss = eq.steady.steady_state_for_output(Vector::Constant(1, 1.0));
  eq.x0 = ss.x_s;
  eq.y_t = Vector::Constant(1, 1.0);
  OcpAssembler asmb_eq(eq);
  const OcpSolution sol_eq = solve(asmb_eq);
  const Vector cand_eq =
      shifted_candidate(asmb_eq, sol_eq, ss.x_s, 1e-6, nullptr);
  CHECK((cand_eq - sol_eq.decision).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("shifted candidate flags plant-model mismatch") {
  OcpProblem pb = di_problem({.N = 2});
  pb.x0 << -4.2, 0.9;
  pb.y_t = Vector::Constant(1, 3.0);
  OcpAssembler asmb(pb);
  const OcpSolution sol = solve(asmb);
  Vector wrong = pb.model.A * pb.x0 + pb.model.B * sol.u_seq[0];
  wrong(1) += 4.9;  // drift far outside the box
  CHECK_THROWS_AS(shifted_candidate(asmb, sol, wrong, 1e-6, nullptr),
                  PlantModelMismatch);
}

TEST_CASE("candidate cost obeys the decrease identity") {
  OcpProblem pb = di_problem({.N = 5});
  pb.x0 << -2.0, 0.5;
  pb.y_t = Vector::Constant(1, 3.0);
  OcpAssembler asmb(pb);
  const OcpSolution sol = solve(asmb);
  const Vector x_next = pb.model.A * pb.x0 + pb.model.B * sol.u_seq[0];
  const Vector cand = shifted_candidate(asmb, sol, x_next, 1e-6, nullptr);
  const double cand_cost = asmb.eval_cost(cand).total;
  const Vector dx = pb.x0 - sol.x_a;
  const Vector du = sol.u_seq[0] - sol.u_a;
  const double stage = dx.dot(pb.Q * dx) + du.dot(pb.R * du);
  // No avoidance terms: V(cand at successor) - V* = -stage exactly.
  CHECK(cand_cost - sol.cost.total == doctest::Approx(-stage).epsilon(1e-9));
}

TEST_CASE("closed-loop optimal values are nonincreasing without regions") {
  OcpProblem pb = di_problem({.N = 4});
  pb.x0 << -3.0, 0.0;
  pb.y_t = Vector::Constant(1, 2.0);
  OcpAssembler asmb(pb);
  Vector x = pb.x0;
  OcpSolution sol = solve(asmb);
  double prev_value = sol.cost.total;
  for (int k = 0; k < 30; ++k) {
    x = pb.model.A * x + pb.model.B * sol.u_seq[0];
    const Vector cand = shifted_candidate(asmb, sol, x, 1e-6, nullptr);
    sol = solve(asmb, &cand);
    CHECK(sol.cost.total <= prev_value + 1e-8);
    prev_value = sol.cost.total;
  }
  CHECK(prev_value <= 1e-6);
}

TEST_CASE("monotone merit across SQP iterations") {
  OcpProblem pb = di_problem({.N = 4});
  pb.x0 << -3.0, 0.0;
  pb.y_t = Vector::Constant(1, 4.0);
  pb.avoidance.regions.push_back(output_sphere(0.0, 0.8));
  pb.avoidance.mu.push_back(1e5);
  pb.options.keep_trace = true;
  OcpAssembler asmb(pb);
  const OcpSolution sol = solve(asmb);
  REQUIRE(sol.trace.size() >= 1);
  for (size_t i = 1; i < sol.trace.size(); ++i)
    CHECK(sol.trace[i].merit <= sol.trace[i - 1].merit + 1e-9);
}

TEST_CASE("infeasible initial state raises") {
  OcpProblem pb = di_problem({.N = 1});
  pb.x0 << 4.9, 4.9;  // cannot stay inside the box in one step
  pb.y_t = Vector::Constant(1, 0.0);
  CHECK_THROWS_AS(solve(pb), InfeasibleProblem);
}

TEST_CASE("steady optimum matches a grid over the manifold") {
  // Start at the offset-optimal steady state for an unreachable target;
  // the solver must stay on the grid-optimal artificial output.
  OcpProblem pb = di_problem({.N = 3});
  pb.y_t = Vector::Constant(1, 9.0);
  const Polytope Yr = reachable_output_set(pb.steady);
  const auto [lo, hi] = Yr.bounding_box();
  double best_y = lo(0), best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 1000; ++i) {
    const double y = lo(0) + (hi(0) - lo(0)) * i / 1000.0;
    const double val = pb.kappa(0, 0) * (y - 9.0) * (y - 9.0);
    if (val < best_val) {
      best_val = val;
      best_y = y;
    }
  }
  const auto ss =
      pb.steady.steady_state_for_output(Vector::Constant(1, best_y));
  pb.x0 = ss.x_s;
  const OcpSolution sol = solve(pb);
  CHECK(std::abs(sol.y_a(0) - best_y) <= 2e-2);
  CHECK((sol.x_seq[0] - sol.x_a).norm() <= 1e-4);
}

TEST_CASE("solver trace dumps as csv") {
  OcpProblem pb = di_problem({.N = 3});
  pb.x0 << -2.0, 0.0;
  pb.y_t = Vector::Constant(1, 2.0);
  pb.options.keep_trace = true;
  const OcpSolution sol = solve(pb);
  REQUIRE(!sol.trace.empty());
  write_trace_csv(sol.trace, "/tmp/stmpc_trace.csv");
  std::ifstream in("/tmp/stmpc_trace.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "iteration,merit,step_norm,kkt_residual");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == static_cast<int>(sol.trace.size()));
}
