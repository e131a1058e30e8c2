#include <doctest.h>

#include "stmpc/controller.hpp"
#include "stmpc/errors.hpp"
#include "support/fixtures.hpp"

using namespace stmpc;
using namespace test_fixtures;

namespace {

// Exact-model closed loop on the double integrator.
std::vector<StepRecord> run_di_loop(OcpProblem pb, const Vector& x0,
                                    int steps,
                                    const Vector* switch_target = nullptr,
                                    int switch_at = -1) {
  Controller controller(pb);
  Vector x = x0;
  Vector y_t = pb.y_t;
  std::vector<StepRecord> records;
  for (int k = 0; k < steps; ++k) {
    if (switch_target && k == switch_at) y_t = *switch_target;
    auto [u, rec] = controller.control_step(x, y_t, pb.avoidance);
    records.push_back(rec);
    x = pb.model.A * x + pb.model.B * u;
  }
  return records;
}

}  // namespace

TEST_CASE("equilibrium hold applies the steady input") {
  OcpProblem pb = di_problem({.N = 3});
  const Vector y = Vector::Constant(1, 2.0);
  const auto ss = pb.steady.steady_state_for_output(y);
  pb.y_t = y;
  pb.x0 = ss.x_s;
  Controller controller(pb);
  auto [u, rec] = controller.control_step(ss.x_s, y, AvoidanceSpec{});
  CHECK((u - ss.u_s).norm() <= 1e-7);
  CHECK(rec.v_total <= 1e-9);
  CHECK(rec.feasible);
}

TEST_CASE("closed loop converges and stays feasible") {
  OcpProblem pb = di_problem({.N = 5});
  pb.x0 << -3.0, 0.0;
  pb.y_t = Vector::Constant(1, 2.5);
  const auto records = run_di_loop(pb, pb.x0, 40);
  for (const auto& rec : records) CHECK(rec.feasible);
  const auto& last = records.back();
  CHECK(std::abs(last.y(0) - 2.5) <= 1e-3);
  for (const auto& rec : records) {
    CHECK(pb.steady.equilibrium_residual(rec.x_a, rec.u_a) <= 1e-8);
    CHECK(pb.steady.lambda_zs_violation(rec.x_a, rec.u_a) <= 1e-8);
  }
}

TEST_CASE("target change keeps every step feasible") {
  OcpProblem pb = di_problem({.N = 5});
  pb.x0 << -3.0, 0.0;
  pb.y_t = Vector::Constant(1, 3.0);
  const Vector new_target = Vector::Constant(1, -2.0);
  const auto records = run_di_loop(pb, pb.x0, 60, &new_target, 30);
  for (const auto& rec : records) CHECK(rec.feasible);
  CHECK(std::abs(records.back().y(0) + 2.0) <= 1e-3);
  const auto report = iss_diagnostics(records, 0.0);
  CHECK(report.violations == 0);
}

TEST_CASE("temporary region produces a transient avoidance cost") {
  // Region sensed for a while, then gone (fresh measurements each sample):
  // the avoidance cost is positive only transiently and tracking resumes.
  OcpProblem pb = di_problem({.N = 5});
  pb.x0 << -3.0, 0.0;
  pb.y_t = Vector::Constant(1, 3.0);
  Controller controller(pb);
  Vector x = pb.x0;
  AvoidanceSpec blocked;
  blocked.regions.push_back(output_sphere(0.0, 0.7));
  blocked.mu.push_back(1e5);
  bool saw_avoidance = false;
  std::vector<StepRecord> records;
  for (int k = 0; k < 90; ++k) {
    const AvoidanceSpec& regions = k < 25 ? blocked : pb.avoidance;
    auto [u, rec] = controller.control_step(x, pb.y_t, regions);
    records.push_back(rec);
    if (rec.v_avoid > 1e-9) saw_avoidance = true;
    x = pb.model.A * x + pb.model.B * u;
  }
  CHECK(saw_avoidance);
  CHECK(records.back().v_avoid <= 1e-9);
  CHECK(std::abs(records.back().y(0) - 3.0) <= 1e-2);
  for (const auto& rec : records) CHECK(rec.feasible);
}

TEST_CASE("permanent blocking region: plateau at the minimizing boundary") {
  // A 1-D output cannot pass around an interval region: the loop settles
  // where offset plus avoidance is minimized, just at the near wall.
  OcpProblem pb = di_problem({.N = 5});
  pb.x0 << -3.0, 0.0;
  pb.y_t = Vector::Constant(1, 3.0);
  Controller controller(pb);
  Vector x = pb.x0;
  AvoidanceSpec blocked;
  blocked.regions.push_back(output_sphere(0.0, 0.7));
  blocked.mu.push_back(1e5);
  std::vector<StepRecord> records;
  for (int k = 0; k < 120; ++k) {
    auto [u, rec] = controller.control_step(x, pb.y_t, blocked);
    records.push_back(rec);
    x = pb.model.A * x + pb.model.B * u;
  }
  for (const auto& rec : records) CHECK(rec.feasible);
  const auto& last = records.back();
  CHECK(last.y(0) == doctest::Approx(-0.7).epsilon(0.02));
  CHECK(std::abs(last.y(0) - 3.0) > 0.5);      // strictly positive error
  CHECK(last.min_clearance >= -0.01);          // at most grazing the wall
  const auto report = iss_diagnostics(records, 0.0);
  CHECK(report.violations == 0);
  CHECK(report.error_plateaued);
}

TEST_CASE("initial infeasibility is reported at step zero") {
  OcpProblem pb = di_problem({.N = 1});
  pb.y_t = Vector::Constant(1, 0.0);
  Controller controller(pb);
  Vector bad(2);
  bad << 4.9, 4.9;
  CHECK_THROWS_AS(controller.control_step(bad, pb.y_t, AvoidanceSpec{}),
                  InitialInfeasible);
}

TEST_CASE("iss diagnostics on an obstacle-free run") {
  OcpProblem pb = di_problem({.N = 5});
  pb.x0 << -3.0, 0.5;
  pb.y_t = Vector::Constant(1, 2.0);
  const auto records = run_di_loop(pb, pb.x0, 50);
  const auto report = iss_diagnostics(records, 0.0);
  CHECK(report.violations == 0);
  CHECK(report.avoidance_vanished);
  CHECK(report.error_converged);
  // Strict per-step decrease on the exact model.
  for (size_t k = 1; k < records.size(); ++k) {
    const double dv = records[k].v_total - records[k - 1].v_total;
    CHECK(dv <= -records[k - 1].stage_cost + 1e-6);
  }
}

TEST_CASE("iss diagnostics flags a corrupted log") {
  OcpProblem pb = di_problem({.N = 5});
  pb.x0 << -3.0, 0.5;
  pb.y_t = Vector::Constant(1, 2.0);
  auto records = run_di_loop(pb, pb.x0, 20);
  records[10].v_total = records[10].cand_value + 1.0;  // impossible value
  const auto report = iss_diagnostics(records, 0.0);
  CHECK(report.violations >= 1);
}

TEST_CASE("equilibrium run logs all-zero values") {
  OcpProblem pb = di_problem({.N = 3});
  const Vector y = Vector::Constant(1, 1.0);
  const auto ss = pb.steady.steady_state_for_output(y);
  pb.x0 = ss.x_s;
  pb.y_t = y;
  const auto records = run_di_loop(pb, pb.x0, 10);
  for (const auto& rec : records) {
    CHECK(rec.v_total <= 1e-9);
    CHECK(rec.stage_cost <= 1e-9);
    CHECK(rec.v_avoid == 0.0);
  }
  const auto report = iss_diagnostics(records, 0.0);
  CHECK(report.violations == 0);
}

TEST_CASE("domain of attraction probe") {
  OcpProblem pb = di_problem({.N = 2});
  pb.y_t = Vector::Constant(1, 0.0);
  std::vector<Vector> grid;
  for (double p = -6.0; p <= 6.0; p += 0.5) {
    Vector x(2);
    x << p, 0.0;
    grid.push_back(x);
  }
  const auto res2 = domain_of_attraction_probe(pb, grid);

  for (const auto& r : res2) {
    if (std::abs(r.x0(0)) <= 4.9) CHECK(r.feasible);
    if (std::abs(r.x0(0)) > 5.0) CHECK_FALSE(r.feasible);
  }

  // The feasible set grows with the horizon: high-speed states need the
  // longer horizon to decelerate into the terminal set.
  OcpProblem pb8 = di_problem({.N = 8});
  pb8.y_t = Vector::Constant(1, 0.0);
  std::vector<Vector> edge_grid;
  for (double pos = -5.0; pos <= 0.0; pos += 0.5) {
    for (double v = 2.0; v <= 4.5; v += 0.25) {
      Vector x(2);
      x << pos, v;
      edge_grid.push_back(x);
    }
  }
  const auto narrow = domain_of_attraction_probe(pb, edge_grid);
  const auto wide = domain_of_attraction_probe(pb8, edge_grid);
  int count2 = 0, count8 = 0;
  for (size_t i = 0; i < edge_grid.size(); ++i) {
    count2 += narrow[i].feasible;
    count8 += wide[i].feasible;
    if (narrow[i].feasible) CHECK(wide[i].feasible);
  }
  CHECK(count8 > count2);
}

TEST_CASE("region clearance conventions") {
  const AvoidRegion sphere = output_sphere(0.0, 1.0);
  CHECK(region_clearance(sphere, Vector::Constant(1, 3.0)) ==
        doctest::Approx(2.0));
  CHECK(region_clearance(sphere, Vector::Zero(1)) == doctest::Approx(-1.0));

  Matrix E1(2, 2);
  E1 << 1.0, 0.0, 0.0, 1.0;
  EllipsoidUnionComplement shape;
  shape.terms.push_back({E1, Vector::Zero(2), 0.15});
  AvoidRegion plate;
  plate.shape = shape;
  // At the origin q = 0: clearance 1.0 against the true plate boundary.
  CHECK(region_clearance(plate, Vector::Zero(2)) == doctest::Approx(1.0));
  Vector outside(2);
  outside << 2.0, 0.0;
  CHECK(region_clearance(plate, outside) < 0.0);
}

TEST_CASE("margin-enclosed regions guarantee true-region avoidance") {
  // sigma > 1 encloses the penalized sphere; logged outputs must never
  // carry positive penalty against the unenclosed region.
  OcpProblem pb = di_problem({.N = 5});
  pb.x0 << -3.0, 0.0;
  pb.y_t = Vector::Constant(1, 3.0);
  AvoidanceSpec margin;
  AvoidRegion enclosed = output_sphere(0.0, 0.7);
  enclosed.sigma = 1.25;
  margin.regions.push_back(enclosed);
  margin.mu.push_back(1e5);

  AvoidRegion true_region = output_sphere(0.0, 0.7);  // sigma = 1

  Controller controller(pb);
  Vector x = pb.x0;
  for (int k = 0; k < 120; ++k) {
    auto [u, rec] = controller.control_step(x, pb.y_t, margin);
    CHECK(penalty_value(true_region, rec.y) == 0.0);
    CHECK(rec.min_clearance >= 0.0);
    x = pb.model.A * x + pb.model.B * u;
  }
}

TEST_CASE("fallback returns the candidate verbatim") {
  OcpProblem pb = di_problem({.N = 4});
  pb.x0 << -2.0, 0.5;
  pb.y_t = Vector::Constant(1, 3.0);
  OcpAssembler asmb(pb);
  const OcpSolution first = solve(asmb);
  const Vector x_next = pb.model.A * pb.x0 + pb.model.B * first.u_seq[0];
  const Vector cand = shifted_candidate(asmb, first, x_next, 1e-6, nullptr);

  OcpProblem stalled = pb;
  stalled.x0 = x_next;
  stalled.options.max_major_iterations = 0;
  OcpAssembler asmb2(stalled);
  const OcpSolution sol = solve(asmb2, &cand);
  CHECK(sol.status == SolveStatus::fallback_candidate);
  CHECK((sol.decision - cand).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sol.constraint_violation <= 1e-9);
  // The applied input is the candidate's first element.
  CHECK((sol.u_seq[0] - first.u_seq[1]).cwiseAbs().maxCoeff() == 0.0);
}
