#pragma once

// Shared test systems: the double integrator with box constraints used
// throughout the unit and acceptance suites.

#include "stmpc/ocp.hpp"

namespace test_fixtures {

using namespace stmpc;

inline LinearModel double_integrator() {
  LinearModel model;
  model.A = Matrix(2, 2);
  model.A << 1, 1, 0, 1;
  model.B = Matrix(2, 1);
  model.B << 0, 1;
  model.C = Matrix(1, 2);
  model.C << 1, 0;
  model.D = Matrix::Zero(1, 1);
  return model;
}

inline Polytope di_constraints() {
  Vector lo(3), hi(3);
  lo << -5, -5, -1;
  hi << 5, 5, 1;
  return Polytope::box(lo, hi);
}

struct DiOptions {
  int N = 2;
  double lambda = 0.99;
  TerminalMode mode = TerminalMode::invariant_set;
  double kappa = 100.0;
};

inline OcpProblem di_problem(const DiOptions& opt = {}) {
  const LinearModel model = double_integrator();
  const Polytope Z = di_constraints();
  const Matrix Q = Matrix::Identity(2, 2);
  const Matrix R = Matrix::Identity(1, 1);

  TerminalIngredients terminal;
  terminal.lambda = opt.lambda;
  if (opt.mode == TerminalMode::terminal_equality) {
    terminal = terminal_equality_ingredients(model, Q, R, opt.N, opt.lambda);
  } else {
    const LqrResult lqr = compute_lqr_gain(model, Q, R);
    terminal.mode = TerminalMode::invariant_set;
    terminal.K = lqr.K;
    terminal.P = lqr.P;
    terminal.omega =
        compute_tracking_invariant_set(model, lqr.K, Z, opt.lambda);
  }

  OcpProblem pb{model,
                opt.N,
                Q,
                R,
                terminal,
                Z,
                SteadyStateMap(model, Z, opt.lambda),
                Matrix::Constant(1, 1, opt.kappa),
                AvoidanceSpec{},
                Vector::Zero(2),
                Vector::Zero(1),
                SqpOptions{}};
  return pb;
}

inline AvoidRegion output_sphere(double center, double radius) {
  AvoidRegion region;
  region.shape = SphereRegion{Vector::Constant(1, center), radius};
  return region;
}

}  // namespace test_fixtures
