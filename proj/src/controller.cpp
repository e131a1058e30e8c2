#include "stmpc/controller.hpp"

#include <cmath>
#include <sstream>

#include "stmpc/errors.hpp"

namespace stmpc {

double region_clearance(const AvoidRegion& region, const Vector& y) {
  // Clearance is measured against the underlying hazard, not the safety
  // enclosure: sigma and the ellipse margins gamma are deliberately
  // excluded so the log shows the physically meaningful distance.
  if (const auto* s = std::get_if<SphereRegion>(&region.shape)) {
    const int d = static_cast<int>(s->center.size());
    return (y.head(d) - s->center).norm() - s->radius;
  }
  if (const auto* e = std::get_if<EllipsoidUnionComplement>(&region.shape)) {
    double min_g = std::numeric_limits<double>::infinity();
    for (const auto& t : e->terms) {
      const Vector diff = y - t.center;
      min_g = std::min(min_g, diff.dot(t.E * diff) - 1.0);
    }
    return -min_g;
  }
  const auto& hs = std::get<HalfspaceIntersection>(region.shape);
  double min_g = std::numeric_limits<double>::infinity();
  for (int j = 0; j < hs.A.rows(); ++j)
    min_g = std::min(min_g, hs.b(j) - hs.A.row(j).dot(y));
  return -min_g;
}

Controller::Controller(const OcpProblem& problem_template)
    : assembler_(problem_template) {}

std::pair<Vector, StepRecord> Controller::control_step(
    const Vector& x, const Vector& y_t, const AvoidanceSpec& regions) {
  StepRecord rec;
  rec.k = step_index_;
  rec.x = x;
  rec.y_t = y_t;
  rec.n_regions = static_cast<int>(regions.regions.size());

  assembler_.set_avoidance(regions);
  assembler_.set_target(y_t);

  Vector warm;
  bool have_warm = false;
  std::vector<int> warm_ws;

  if (last_solution_) {
    const OcpSolution& prev = *last_solution_;
    const Vector x_succ = assembler_.problem().model.A * last_state_ +
                          assembler_.problem().model.B * prev.u_seq[0];
    // Lemma 3 candidate at the model successor: tail + terminal law.
    double viol_model = 0.0;
    Vector d_model;
    try {
      d_model = shifted_candidate(assembler_, prev, x_succ,
                                  std::numeric_limits<double>::infinity(),
                                  &viol_model);
    } catch (const PlantModelMismatch&) {
      d_model = Vector();
    }
    if (d_model.size() > 0) {
      rec.cand_residual_model = viol_model;
      const CostParts c = assembler_.eval_cost(d_model);
      rec.cand_value_model = c.total;
      rec.cand_avoid_model = c.avoidance;
    }

    // Warm start at the measured state, repaired if the plant drifted.
    assembler_.set_state(x);
    if (d_model.size() > 0) {
      const double viol_meas = assembler_.max_violation(d_model);
      if (viol_meas <= assembler_.problem().options.constraint_tol) {
        warm = d_model;
        have_warm = true;
      } else {
        const Phase1Result repair = qp_phase1(
            assembler_.eq_matrix(), assembler_.eq_rhs(),
            assembler_.ineq_matrix(), assembler_.ineq_rhs(), &d_model, 1e-8);
        if (repair.feasible) {
          warm = repair.x;
          have_warm = true;
        }
      }
    }
    warm_ws = prev.working_set;
  } else {
    assembler_.set_state(x);
  }

  if (have_warm) {
    const CostParts c = assembler_.eval_cost(warm);
    rec.cand_value = c.total;
    rec.cand_avoid = c.avoidance;
  }

  OcpSolution sol;
  try {
    sol = solve(assembler_, have_warm ? &warm : nullptr,
                warm_ws.empty() ? nullptr : &warm_ws);
  } catch (const InfeasibleProblem& err) {
    if (step_index_ == 0)
      throw InitialInfeasible(std::string("first solve infeasible: ") +
                              err.what());
    throw;
  }

  rec.u = sol.u_seq[0];
  rec.y = sol.y_seq[0];
  rec.x_a = sol.x_a;
  rec.u_a = sol.u_a;
  rec.y_a = sol.y_a;
  rec.v_total = sol.cost.total;
  rec.v_dynamic = sol.cost.dynamic;
  rec.v_offset = sol.cost.offset;
  rec.v_avoid = sol.cost.avoidance;
  {
    const Vector dx = x - sol.x_a;
    const Vector du = sol.u_seq[0] - sol.u_a;
    rec.stage_cost = dx.dot(assembler_.problem().Q * dx) +
                     du.dot(assembler_.problem().R * du);
  }
  if (!have_warm) {
    rec.cand_value = sol.cost.total;
    rec.cand_avoid = sol.cost.avoidance;
  }
  rec.feasible = sol.constraint_violation <=
                 assembler_.problem().options.constraint_tol;
  rec.status = sol.status;
  rec.sqp_iterations = sol.sqp_iterations;
  rec.qp_iterations = sol.qp_iterations;
  for (size_t i = 0; i < regions.regions.size(); ++i)
    rec.min_clearance = std::min(
        rec.min_clearance, region_clearance(regions.regions[i], rec.y));

  last_solution_ = sol;
  last_state_ = x;
  ++step_index_;
  return {sol.u_seq[0], rec};
}

IssReport iss_diagnostics(const std::vector<StepRecord>& records, double S,
                          double tol) {
  IssReport report;
  report.s_bound = S;
  if (records.size() < 2) return report;

  for (size_t k = 1; k < records.size(); ++k) {
    const StepRecord& prev = records[k - 1];
    const StepRecord& cur = records[k];
    IssStepCheck chk;
    chk.k = cur.k;
    chk.delta_v = cur.v_total - prev.v_total;
    chk.mismatch_correction = cur.cand_value - cur.cand_value_model;
    // The decrease chain compares value functions of the same problem:
    // a target change resets it (feasibility is still checked).
    const bool target_changed =
        cur.y_t.size() != prev.y_t.size() ||
        (cur.y_t - prev.y_t).cwiseAbs().maxCoeff() > 0.0;

    // Candidate chain from the proof, an identity through the Lyapunov
    // equation: V(cand@succ) - V*(k-1) = -stage(k-1) + dV_av.
    const double lhs = cur.cand_value_model - prev.v_total;
    const double rhs =
        -prev.stage_cost + (cur.cand_avoid_model - prev.v_avoid);
    const double scale = 1.0 + std::abs(prev.v_total);
    chk.decrease_slack = rhs - lhs;
    chk.decrease_ok = target_changed || lhs <= rhs + tol + 1e-9 * scale;

    // Optimality against the candidate actually used.
    chk.dominance_slack = cur.cand_value - cur.v_total;
    chk.dominance_ok = cur.v_total <= cur.cand_value + tol + 1e-9 * scale;

    if (!chk.decrease_ok || !chk.dominance_ok) ++report.violations;
    report.steps.push_back(chk);
  }

  const StepRecord& last = records.back();
  report.final_v_avoid = last.v_avoid;
  report.avoidance_vanished = last.v_avoid <= 1e-9;
  report.final_error = (last.y - last.y_t).norm();
  for (const auto& rec : records)
    report.max_v_avoid = std::max(report.max_v_avoid, rec.v_avoid);
  report.bound_respected = S <= 0.0 || report.max_v_avoid <= S;

  // Plateau detection over the last fifth of the run.
  const size_t tail_start = records.size() - records.size() / 5 - 1;
  double tail_min = std::numeric_limits<double>::infinity();
  double tail_max = 0.0;
  for (size_t k = tail_start; k < records.size(); ++k) {
    const double err = (records[k].y - records[k].y_t).norm();
    tail_min = std::min(tail_min, err);
    tail_max = std::max(tail_max, err);
  }
  report.error_converged = report.final_error <= 1e-2;
  report.error_plateaued = !report.error_converged &&
                           (tail_max - tail_min) <= 0.05 * (1.0 + tail_max);
  return report;
}

std::string IssReport::summary() const {
  std::ostringstream os;
  os << "steps checked: " << steps.size() << "\n";
  os << "violations: " << violations << "\n";
  os << "avoidance cost vanished: " << (avoidance_vanished ? "yes" : "no")
     << " (final V_av = " << final_v_avoid << ", max " << max_v_avoid
     << ")\n";
  if (s_bound > 0.0)
    os << "avoidance bound S = " << s_bound << ": "
       << (bound_respected ? "respected" : "EXCEEDED") << "\n";
  os << "tracking error: " << final_error
     << (error_converged ? " (converged)"
                         : (error_plateaued ? " (plateaued)" : " (moving)"))
     << "\n";
  return os.str();
}

std::vector<DoaProbeResult> domain_of_attraction_probe(
    const OcpProblem& problem_template, const std::vector<Vector>& grid) {
  OcpProblem pb = problem_template;
  pb.avoidance = AvoidanceSpec{};
  OcpAssembler asmb(pb);
  std::vector<DoaProbeResult> out;
  out.reserve(grid.size());
  for (const auto& x0 : grid) {
    DoaProbeResult res;
    res.x0 = x0;
    asmb.set_state(x0);
    if (asmb.x0_violation() <= 1e-9)
      res.feasible = asmb.find_feasible().has_value();
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace stmpc
