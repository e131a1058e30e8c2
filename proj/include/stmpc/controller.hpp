#pragma once

#include <memory>
#include <optional>

#include "stmpc/ocp.hpp"

namespace stmpc {

/// Per-step closed-loop log entry. The candidate columns carry the shifted
/// warm start evaluated both at the model successor (the recursive-
/// feasibility object) and at the measured state it was actually used at.
struct StepRecord {
  int k = 0;
  Vector x, u, y;
  Vector y_t;
  Vector x_a, u_a, y_a;
  double v_total = 0.0;
  double v_dynamic = 0.0;
  double v_offset = 0.0;
  double v_avoid = 0.0;
  double stage_cost = 0.0;
  double cand_value = 0.0;        // shifted candidate at the measured state
  double cand_avoid = 0.0;
  double cand_value_model = 0.0;  // shifted candidate at the model successor
  double cand_avoid_model = 0.0;
  double cand_residual_model = 0.0;
  bool feasible = false;
  SolveStatus status = SolveStatus::converged;
  int sqp_iterations = 0;
  int qp_iterations = 0;
  int n_regions = 0;
  double min_clearance = std::numeric_limits<double>::infinity();
};

/// Distance-to-freedom of an output w.r.t. one region: positive iff the
/// penalty vanishes. Euclidean for spheres, quadric units for the
/// product-form kinds.
double region_clearance(const AvoidRegion& region, const Vector& y);

/// Receding-horizon tracking controller with penalty-based avoidance.
/// Owns the assembled problem; call control_step once per sample.
class Controller {
 public:
  explicit Controller(const OcpProblem& problem_template);

  /// Solve, apply u*(0), and log. Regions may change between calls.
  /// Throws InitialInfeasible when the very first solve has no feasible
  /// point.
  std::pair<Vector, StepRecord> control_step(const Vector& x,
                                             const Vector& y_t,
                                             const AvoidanceSpec& regions);

  const std::optional<OcpSolution>& last_solution() const {
    return last_solution_;
  }
  int step_index() const { return step_index_; }
  OcpAssembler& assembler() { return assembler_; }

 private:
  OcpAssembler assembler_;
  std::optional<OcpSolution> last_solution_;
  Vector last_state_;
  int step_index_ = 0;
};

struct IssStepCheck {
  int k = 0;
  bool decrease_ok = true;       // candidate chain identity (Lemma 6 proof)
  bool dominance_ok = true;      // V*(k) <= candidate value used at k
  double decrease_slack = 0.0;
  double dominance_slack = 0.0;
  double delta_v = 0.0;
  double mismatch_correction = 0.0;  // candidate value measured minus model
};

struct IssReport {
  std::vector<IssStepCheck> steps;
  int violations = 0;
  bool avoidance_vanished = false;   // V_av at the final step ~ 0
  bool error_converged = false;      // tracking error below threshold
  bool error_plateaued = false;      // settled at a strictly positive error
  double final_error = 0.0;
  double final_v_avoid = 0.0;
  double s_bound = 0.0;              // supplied avoidance-cost bound
  double max_v_avoid = 0.0;
  bool bound_respected = true;       // max V_av <= S whenever S > 0

  std::string summary() const;
};

/// Term-by-term evaluation of the decrease chain from logged records, plus
/// convergence/plateau classification of the tracking error.
IssReport iss_diagnostics(const std::vector<StepRecord>& records, double S,
                          double tol = 1e-6);

struct DoaProbeResult {
  Vector x0;
  bool feasible = false;
};

/// Feasibility of the region-free problem from each grid state; a sampling
/// surrogate for the N-step controllable set.
std::vector<DoaProbeResult> domain_of_attraction_probe(
    const OcpProblem& problem_template, const std::vector<Vector>& grid);

}  // namespace stmpc
