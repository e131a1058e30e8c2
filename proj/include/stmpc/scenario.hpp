#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stmpc/controller.hpp"
#include "stmpc/errors.hpp"
#include "stmpc/plants.hpp"

namespace stmpc {

enum class PlantKind { linear, ball_on_plate, quadrotor };

struct TargetSchedule {
  double time = 0.0;
  Vector y;  // absolute coordinates
};

struct ProbeSpec {
  std::vector<int> dims;
  Vector lo, hi;
  std::vector<int> count;
};

/// Parsed scenario file. Model-frame quantities are deviations from the
/// linearization equilibrium; plant-frame quantities are absolute.
struct ScenarioConfig {
  std::string name;
  PlantKind plant_kind = PlantKind::linear;
  double T_s = 0.0;
  int N = 0;
  double lambda = 0.99;
  double duration = 0.0;
  TerminalMode terminal_mode = TerminalMode::invariant_set;
  Matrix Q, R, kappa;
  double epsilon = 2.0;

  LinearModel model;        // discrete prediction model (model frame)
  Vector x_eq, u_eq, y_eq;  // frame offsets (zero for linear plants)
  Polytope Z;               // model frame
  Vector x0_abs;            // plant frame

  std::vector<TargetSchedule> targets;
  AvoidanceSpec static_regions;  // absolute coordinates
  bool sensor_driven = false;
  RangeSensor sensor;
  double sensor_mu = 0.0;
  double sensor_sigma = 1.0;  // enclosure applied to emitted spheres
  std::optional<WorldMap> map;

  BallPlatePlant ball_plate;
  QuadrotorPlant quadrotor;

  bool multistart = false;
  int restarts = 2;
  std::uint64_t seed = 1;
  std::string omega_cache;
  std::string output_dir;
  std::optional<ProbeSpec> probe;

  Vector to_model_state(const Vector& x_abs) const { return x_abs - x_eq; }
  Vector to_model_output(const Vector& y_abs) const { return y_abs - y_eq; }
  Vector to_plant_input(const Vector& u_model) const { return u_model + u_eq; }
};

ScenarioConfig load_config(const std::string& path);

struct ValidationIssue {
  std::string field;
  std::string message;
};

/// Dimension checks, weight-matrix assumptions (R positive definite,
/// (Q^{1/2}, A) observable), the rank condition, lambda range, and static
/// region containment. Empty on a clean config.
std::vector<ValidationIssue> validate_config(const ScenarioConfig& config);

struct ScenarioResult {
  std::vector<StepRecord> records;  // absolute coordinates
  double final_error = 0.0;
  double min_clearance = std::numeric_limits<double>::infinity();
  double feasibility_rate = 0.0;
  IssReport iss;
  std::string output_dir;
};

/// Closed loop: build terminal ingredients (cached invariant set when a
/// cache path is configured), run the controller against the truth plant,
/// write trajectory.csv, summary.txt, and the SVG plots.
ScenarioResult run_scenario(const ScenarioConfig& config,
                            bool write_artifacts = true);

/// Feasibility sweep over the configured probe grid; writes doa.csv when
/// artifacts are enabled.
std::vector<DoaProbeResult> run_probe(const ScenarioConfig& config,
                                      bool write_artifacts = true);

/// Assemble the controller template (model, terminal ingredients, weights)
/// exactly as run_scenario would; exposed for tests and the acceptance
/// suite.
OcpProblem build_problem_template(const ScenarioConfig& config);

void save_invariant_set(const TrackingInvariantSet& omega,
                        const std::string& path);
std::optional<TrackingInvariantSet> load_invariant_set(
    const std::string& path, int n, int m);

}  // namespace stmpc
