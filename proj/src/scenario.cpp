#include "stmpc/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "stmpc/csvlog.hpp"
#include "stmpc/errors.hpp"
#include "stmpc/svgplot.hpp"

namespace stmpc {

namespace {

using nlohmann::json;

Vector parse_vector(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field + ": expected an array");
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(field + ": expected numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

Matrix parse_matrix(const json& j, const std::string& field) {
  if (j.is_object() && j.contains("diag")) {
    const Vector d = parse_vector(j["diag"], field + ".diag");
    Matrix M = Matrix::Zero(d.size(), d.size());
    M.diagonal() = d;
    return M;
  }
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError(field + ": expected a matrix (array of rows)");
  const size_t rows = j.size();
  const size_t cols = j[0].size();
  Matrix M(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (j[r].size() != cols) throw ConfigError(field + ": ragged matrix");
    for (size_t c = 0; c < cols; ++c) M(r, c) = j[r][c].get<double>();
  }
  return M;
}

const json& require(const json& j, const std::string& field) {
  if (!j.contains(field)) throw ConfigError("missing field: " + field);
  return j[field];
}

AvoidRegion parse_region(const json& j, const std::string& field) {
  AvoidRegion region;
  region.sigma = j.value("sigma", 1.0);
  const std::string kind = require(j, "kind").get<std::string>();
  if (kind == "sphere") {
    SphereRegion s;
    s.center = parse_vector(require(j, "center"), field + ".center");
    s.radius = require(j, "radius").get<double>();
    region.shape = s;
  } else if (kind == "ellipsoid_union_complement") {
    EllipsoidUnionComplement e;
    for (const auto& ej : require(j, "ellipses")) {
      EllipseTerm t;
      t.E = parse_matrix(require(ej, "E"), field + ".E");
      t.center = parse_vector(require(ej, "center"), field + ".center");
      t.gamma = ej.value("gamma", 0.0);
      e.terms.push_back(std::move(t));
    }
    region.shape = e;
  } else if (kind == "halfspace_intersection") {
    HalfspaceIntersection h;
    h.A = parse_matrix(require(j, "A"), field + ".A");
    h.b = parse_vector(require(j, "b"), field + ".b");
    region.shape = h;
  } else {
    throw ConfigError(field + ".kind: unknown region kind " + kind);
  }
  return region;
}

// Output-space box from the model-frame constraint set: support of Z under
// the output map in axis directions. Used for containment checks and the
// avoidance bound.
Polytope output_box(const ScenarioConfig& cfg) {
  const int p = cfg.model.p();
  Matrix CD(p, cfg.model.n() + cfg.model.m());
  CD.leftCols(cfg.model.n()) = cfg.model.C;
  CD.rightCols(cfg.model.m()) = cfg.model.D;
  Vector lo(p), hi(p);
  for (int i = 0; i < p; ++i) {
    hi(i) = lp_maximize(cfg.Z.H, cfg.Z.h, CD.row(i).transpose()).value;
    lo(i) = -lp_maximize(cfg.Z.H, cfg.Z.h, (-CD.row(i)).transpose()).value;
  }
  return Polytope::box(lo, hi);
}

AvoidanceSpec regions_to_model_frame(const ScenarioConfig& cfg,
                                     const AvoidanceSpec& abs_spec) {
  AvoidanceSpec out = abs_spec;
  for (auto& region : out.regions) {
    if (auto* s = std::get_if<SphereRegion>(&region.shape)) {
      s->center -= cfg.y_eq.head(s->center.size());
    } else if (auto* e = std::get_if<EllipsoidUnionComplement>(&region.shape)) {
      for (auto& t : e->terms) t.center -= cfg.y_eq.head(t.center.size());
    } else if (auto* h = std::get_if<HalfspaceIntersection>(&region.shape)) {
      h->b -= h->A * cfg.y_eq;
    }
  }
  return out;
}

}  // namespace

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& err) {
    throw ConfigError(std::string("config parse error: ") + err.what());
  }

  ScenarioConfig cfg;
  cfg.name = j.value("name", std::filesystem::path(path).stem().string());
  cfg.T_s = require(j, "T_s").get<double>();
  cfg.N = require(j, "N").get<int>();
  cfg.lambda = j.value("lambda", 0.99);
  cfg.duration = require(j, "duration").get<double>();
  cfg.seed = j.value("seed", 1u);
  cfg.multistart = j.value("multistart", false);
  cfg.restarts = j.value("restarts", 2);
  cfg.omega_cache = j.value("omega_cache", std::string());
  cfg.output_dir = j.value("output_dir", "out/" + cfg.name);

  const std::string mode =
      j.value("terminal_mode", std::string("invariant_set"));
  if (mode == "invariant_set") cfg.terminal_mode = TerminalMode::invariant_set;
  else if (mode == "terminal_equality")
    cfg.terminal_mode = TerminalMode::terminal_equality;
  else throw ConfigError("terminal_mode: unknown mode " + mode);

  const json& plant = require(j, "plant");
  const std::string type = require(plant, "type").get<std::string>();
  cfg.x0_abs = parse_vector(require(plant, "x0"), "plant.x0");

  if (type == "linear") {
    cfg.plant_kind = PlantKind::linear;
    cfg.model.A = parse_matrix(require(plant, "A"), "plant.A");
    cfg.model.B = parse_matrix(require(plant, "B"), "plant.B");
    cfg.model.C = parse_matrix(require(plant, "C"), "plant.C");
    cfg.model.D = parse_matrix(require(plant, "D"), "plant.D");
    cfg.x_eq = Vector::Zero(cfg.model.n());
    cfg.u_eq = Vector::Zero(cfg.model.m());
    cfg.y_eq = Vector::Zero(cfg.model.p());
  } else if (type == "ball_on_plate" || type == "quadrotor") {
    cfg.plant_kind = type == "ball_on_plate" ? PlantKind::ball_on_plate
                                             : PlantKind::quadrotor;
    cfg.x_eq = parse_vector(require(plant, "x_eq"), "plant.x_eq");
    cfg.u_eq = parse_vector(require(plant, "u_eq"), "plant.u_eq");
    VectorField f;
    OutputMap h;
    if (cfg.plant_kind == PlantKind::ball_on_plate) {
      const BallPlatePlant bp = cfg.ball_plate;
      f = [bp](const Vector& x, const Vector& u) {
        return bp.derivative(x, u);
      };
      h = [bp](const Vector& x, const Vector&) { return bp.output(x); };
    } else {
      const QuadrotorPlant q = cfg.quadrotor;
      f = [q](const Vector& x, const Vector& u) { return q.derivative(x, u); };
      h = [q](const Vector& x, const Vector&) { return q.output(x); };
    }
    const ContinuousLinearization ct = linearize(f, h, cfg.x_eq, cfg.u_eq);
    cfg.model = euler_discretize(ct, cfg.T_s);
    cfg.y_eq = h(cfg.x_eq, cfg.u_eq);
  } else {
    throw ConfigError("plant.type: unknown type " + type);
  }

  const json& w = require(j, "weights");
  cfg.Q = parse_matrix(require(w, "Q"), "weights.Q");
  cfg.R = parse_matrix(require(w, "R"), "weights.R");
  cfg.kappa = parse_matrix(require(w, "kappa"), "weights.kappa");

  const json& con = require(j, "constraints");
  const Vector x_min = parse_vector(require(con, "x_min"), "constraints.x_min");
  const Vector x_max = parse_vector(require(con, "x_max"), "constraints.x_max");
  const Vector u_min = parse_vector(require(con, "u_min"), "constraints.u_min");
  const Vector u_max = parse_vector(require(con, "u_max"), "constraints.u_max");
  if (x_min.size() != cfg.model.n() || x_max.size() != cfg.model.n())
    throw ConfigError("constraints.x_min/x_max: wrong dimension");
  if (u_min.size() != cfg.model.m() || u_max.size() != cfg.model.m())
    throw ConfigError("constraints.u_min/u_max: wrong dimension");
  Vector lo(cfg.model.n() + cfg.model.m()), hi(lo.size());
  lo << x_min - cfg.x_eq, u_min - cfg.u_eq;
  hi << x_max - cfg.x_eq, u_max - cfg.u_eq;
  cfg.Z = Polytope::box(lo, hi);

  for (const auto& tj : require(j, "targets")) {
    TargetSchedule t;
    t.time = tj.value("time", 0.0);
    t.y = parse_vector(require(tj, "y"), "targets.y");
    if (t.y.size() != cfg.model.p())
      throw ConfigError("targets.y: wrong dimension");
    cfg.targets.push_back(std::move(t));
  }
  if (cfg.targets.empty()) throw ConfigError("targets: at least one required");

  cfg.epsilon = 2.0;
  if (j.contains("avoidance")) {
    const json& av = j["avoidance"];
    cfg.epsilon = av.value("epsilon", 2.0);
    cfg.static_regions.epsilon = cfg.epsilon;
    const json& mu = require(av, "mu");
    for (const auto& mi : mu) cfg.static_regions.mu.push_back(mi.get<double>());
    int idx = 0;
    for (const auto& rj : require(av, "regions"))
      cfg.static_regions.regions.push_back(
          parse_region(rj, "avoidance.regions[" + std::to_string(idx++) + "]"));
    if (cfg.static_regions.regions.size() != cfg.static_regions.mu.size())
      throw ConfigError("avoidance.mu: length must match regions");
  }
  if (j.contains("sensor")) {
    const json& s = j["sensor"];
    cfg.sensor_driven = true;
    cfg.sensor.range = require(s, "range").get<double>();
    cfg.sensor.emitted_radius = require(s, "radius").get<double>();
    cfg.sensor_mu = require(s, "mu").get<double>();
    cfg.sensor_sigma = s.value("sigma", 1.0);
    if (!(cfg.sensor_sigma >= 1.0))
      throw ConfigError("sensor.sigma: must be >= 1");
    cfg.sensor.check();
    if (!j.contains("map"))
      throw ConfigError("sensor: requires a map section");
  }
  if (j.contains("map")) {
    WorldMap map;
    const json& mj = j["map"];
    map.bounds_lo = parse_vector(require(mj, "bounds_min"), "map.bounds_min");
    map.bounds_hi = parse_vector(require(mj, "bounds_max"), "map.bounds_max");
    for (const auto& oj : require(mj, "obstacles")) {
      Box3 box;
      box.lo = parse_vector(require(oj, "min"), "map.obstacles.min");
      box.hi = parse_vector(require(oj, "max"), "map.obstacles.max");
      map.obstacles.push_back(std::move(box));
    }
    map.check();
    cfg.map = std::move(map);
  }
  if (j.contains("probe")) {
    const json& pj = j["probe"];
    ProbeSpec probe;
    for (const auto& d : require(pj, "dims")) probe.dims.push_back(d.get<int>());
    probe.lo = parse_vector(require(pj, "min"), "probe.min");
    probe.hi = parse_vector(require(pj, "max"), "probe.max");
    for (const auto& c : require(pj, "count"))
      probe.count.push_back(c.get<int>());
    if (probe.dims.size() != probe.count.size() ||
        static_cast<int>(probe.dims.size()) != probe.lo.size())
      throw ConfigError("probe: dims/min/max/count lengths must agree");
    cfg.probe = std::move(probe);
  }
  return cfg;
}

std::vector<ValidationIssue> validate_config(const ScenarioConfig& cfg) {
  std::vector<ValidationIssue> issues;
  auto add = [&issues](const std::string& field, const std::string& msg) {
    issues.push_back({field, msg});
  };

  try {
    cfg.model.check_dimensions();
  } catch (const std::exception& err) {
    add("plant", err.what());
    return issues;
  }
  if (cfg.N < 1) add("N", "horizon must be >= 1");
  if (!(cfg.T_s > 0)) add("T_s", "sampling time must be positive");
  if (!(cfg.lambda > 0.0 && cfg.lambda < 1.0))
    add("lambda", "must lie strictly in (0,1)");
  const double steps = cfg.duration / cfg.T_s;
  if (std::abs(steps - std::round(steps)) > 1e-9)
    add("duration", "must be a multiple of T_s");

  if (cfg.Q.rows() != cfg.model.n() || cfg.Q.cols() != cfg.model.n())
    add("weights.Q", "must be n x n");
  if (cfg.R.rows() != cfg.model.m() || cfg.R.cols() != cfg.model.m())
    add("weights.R", "must be m x m");
  if (cfg.kappa.rows() != cfg.model.p() || cfg.kappa.cols() != cfg.model.p())
    add("weights.kappa", "must be p x p");
  if (issues.empty()) {
    Eigen::LLT<Matrix> rllt(cfg.R);
    if (rllt.info() != Eigen::Success)
      add("weights.R", "must be positive definite");
    Eigen::LLT<Matrix> kllt(cfg.kappa);
    if (kllt.info() != Eigen::Success)
      add("weights.kappa", "must be positive definite");
    try {
      const Matrix Qh = psd_sqrt(cfg.Q);
      if (numeric_rank(observability_matrix(cfg.model.A, Qh)) < cfg.model.n())
        add("weights.Q", "(Q^{1/2}, A) must be observable");
    } catch (const std::exception&) {
      add("weights.Q", "must be positive semidefinite");
    }
  }

  if (numeric_rank(controllability_matrix(cfg.model.A, cfg.model.B)) <
      cfg.model.n())
    add("plant", "prediction model is not controllable");
  if (numeric_rank(observability_matrix(cfg.model.A, cfg.model.C)) <
      cfg.model.n())
    add("plant", "prediction model is not observable");

  const RankConditionReport rank = check_rank_condition(cfg.model);
  if (!rank.holds)
    add("plant", "target equilibrium rank condition fails (rank " +
                     std::to_string(rank.rank) + ")");
  if (rank.shape == SystemShape::thin)
    add("plant",
        "thin system (p > m): targets can only be partially tracked");

  if (!cfg.Z.strictly_contains_origin())
    add("constraints", "the shifted constraint box must contain the "
                       "equilibrium strictly");
  if (cfg.terminal_mode == TerminalMode::terminal_equality) {
    if (numeric_rank(controllability_matrix(cfg.model.A, cfg.model.B,
                                            cfg.N)) < cfg.model.n())
      add("terminal_mode", "N-step controllability matrix is rank deficient");
  }

  if (!cfg.static_regions.empty()) {
    try {
      cfg.static_regions.check();
    } catch (const std::exception& err) {
      add("avoidance", err.what());
    }
    const Polytope Y = output_box(cfg);
    const AvoidanceSpec model_regions =
        regions_to_model_frame(cfg, cfg.static_regions);
    for (size_t i = 0; i < model_regions.regions.size(); ++i) {
      if (!region_inside_output_set(model_regions.regions[i], Y))
        add("avoidance.regions[" + std::to_string(i) + "]",
            "region is not strictly contained in the admissible output set");
    }
  }

  for (const auto& t : cfg.targets)
    if (t.y.size() != cfg.model.p()) add("targets", "dimension mismatch");
  return issues;
}

void save_invariant_set(const TrackingInvariantSet& omega,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write invariant set cache: " + path);
  const int nr = omega.internal.rows();
  const int nd = omega.internal.dim();
  const int brows = static_cast<int>(omega.basis.rows());
  const int bcols = static_cast<int>(omega.basis.cols());
  out << "omega_cache_v1 " << nr << ' ' << nd << ' ' << brows << ' ' << bcols
      << ' ' << omega.iterations << ' ' << (omega.truncated ? 1 : 0) << '\n';
  char buf[40];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf << '\n';
  };
  for (int i = 0; i < nr; ++i)
    for (int c = 0; c < nd; ++c) emit(omega.internal.H(i, c));
  for (int i = 0; i < nr; ++i) emit(omega.internal.h(i));
  for (int i = 0; i < brows; ++i)
    for (int c = 0; c < bcols; ++c) emit(omega.basis(i, c));
}

std::optional<TrackingInvariantSet> load_invariant_set(const std::string& path,
                                                       int n, int m) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string tag;
  int nr, nd, brows, bcols, iters, trunc;
  if (!(in >> tag >> nr >> nd >> brows >> bcols >> iters >> trunc) ||
      tag != "omega_cache_v1")
    return std::nullopt;
  if (brows != n + m || nd != n + bcols) return std::nullopt;
  TrackingInvariantSet omega;
  omega.internal.H = Matrix(nr, nd);
  omega.internal.h = Vector(nr);
  omega.basis = Matrix(brows, bcols);
  omega.iterations = iters;
  omega.truncated = trunc != 0;
  for (int i = 0; i < nr; ++i)
    for (int c = 0; c < nd; ++c)
      if (!(in >> omega.internal.H(i, c))) return std::nullopt;
  for (int i = 0; i < nr; ++i)
    if (!(in >> omega.internal.h(i))) return std::nullopt;
  for (int i = 0; i < brows; ++i)
    for (int c = 0; c < bcols; ++c)
      if (!(in >> omega.basis(i, c))) return std::nullopt;
  const int r = bcols;
  Matrix lift = Matrix::Zero(n + r, 2 * n + m);
  lift.topLeftCorner(n, n) = Matrix::Identity(n, n);
  lift.bottomRightCorner(r, n + m) = omega.basis.transpose();
  omega.halfspaces.H = omega.internal.H * lift;
  omega.halfspaces.h = omega.internal.h;
  return omega;
}

OcpProblem build_problem_template(const ScenarioConfig& cfg) {
  TerminalIngredients terminal;
  terminal.lambda = cfg.lambda;
  if (cfg.terminal_mode == TerminalMode::terminal_equality) {
    terminal = terminal_equality_ingredients(cfg.model, cfg.Q, cfg.R, cfg.N,
                                             cfg.lambda);
  } else {
    const LqrResult lqr = compute_lqr_gain(cfg.model, cfg.Q, cfg.R);
    terminal.mode = TerminalMode::invariant_set;
    terminal.K = lqr.K;
    terminal.P = lqr.P;
    bool loaded = false;
    if (!cfg.omega_cache.empty()) {
      if (auto omega = load_invariant_set(cfg.omega_cache, cfg.model.n(),
                                          cfg.model.m())) {
        terminal.omega = std::move(*omega);
        loaded = true;
      }
    }
    if (!loaded) {
      terminal.omega = compute_tracking_invariant_set(cfg.model, terminal.K,
                                                      cfg.Z, cfg.lambda);
      if (!cfg.omega_cache.empty())
        save_invariant_set(*terminal.omega, cfg.omega_cache);
    }
  }

  OcpProblem pb{cfg.model,
                cfg.N,
                cfg.Q,
                cfg.R,
                terminal,
                cfg.Z,
                SteadyStateMap(cfg.model, cfg.Z, cfg.lambda),
                cfg.kappa,
                AvoidanceSpec{},
                cfg.to_model_state(cfg.x0_abs),
                cfg.to_model_output(cfg.targets.front().y),
                SqpOptions{}};
  pb.avoidance.epsilon = cfg.epsilon;
  pb.options.restarts = cfg.multistart ? cfg.restarts : 0;
  pb.options.seed = cfg.seed;
  return pb;
}

namespace {

void write_plots(const ScenarioConfig& cfg,
                 const std::vector<StepRecord>& records,
                 const std::string& dir) {
  const int p = cfg.model.p();
  std::vector<double> t;
  for (const auto& r : records) t.push_back(r.k * cfg.T_s);

  // Output-space trajectory.
  {
    SvgPlot plot;
    plot.set_equal_aspect(true);
    plot.set_title(cfg.name + ": output trajectory");
    plot.set_axis_labels("y1", "y2");
    if (!cfg.static_regions.empty()) {
      for (const auto& region : cfg.static_regions.regions) {
        if (const auto* e =
                std::get_if<EllipsoidUnionComplement>(&region.shape)) {
          for (const auto& term : e->terms) {
            plot.add_ellipse(term.E, term.center, 1.0, "#2a7a2a");
            plot.add_ellipse(term.E, term.center, 1.0 - term.gamma,
                             "#8fb98f", true);
          }
        } else if (const auto* s = std::get_if<SphereRegion>(&region.shape)) {
          if (s->center.size() >= 2)
            plot.add_circle(s->center(0), s->center(1),
                            region.sigma * s->radius, "#aa3333");
        }
      }
    }
    if (cfg.map) {
      for (const auto& box : cfg.map->obstacles)
        plot.add_rect(box.lo(0), box.lo(1), box.hi(0), box.hi(1), "#4d884d");
    }
    std::vector<double> y1, y2, ya1, ya2;
    for (const auto& r : records) {
      y1.push_back(r.y(0));
      y2.push_back(r.y(std::min(1, p - 1)));
      ya1.push_back(r.y_a(0));
      ya2.push_back(r.y_a(std::min(1, p - 1)));
    }
    plot.add_line(y1, y2, "#1f4e9c", "output");
    plot.add_line(ya1, ya2, "#d08020", "artificial", true);
    for (const auto& target : cfg.targets)
      plot.add_marker(target.y(0), target.y(std::min(1, p - 1)), "#000000");
    plot.write(dir + "/trajectory.svg");
  }
  if (p >= 3) {
    SvgPlot plot;
    plot.set_equal_aspect(true);
    plot.set_title(cfg.name + ": vertical profile");
    plot.set_axis_labels("y1", "y3");
    if (cfg.map)
      for (const auto& box : cfg.map->obstacles)
        plot.add_rect(box.lo(0), box.lo(2), box.hi(0), box.hi(2), "#4d884d");
    std::vector<double> y1, y3, ya1, ya3;
    for (const auto& r : records) {
      y1.push_back(r.y(0));
      y3.push_back(r.y(2));
      ya1.push_back(r.y_a(0));
      ya3.push_back(r.y_a(2));
    }
    plot.add_line(y1, y3, "#1f4e9c", "output");
    plot.add_line(ya1, ya3, "#d08020", "artificial", true);
    for (const auto& target : cfg.targets)
      plot.add_marker(target.y(0), target.y(2), "#000000");
    plot.write(dir + "/trajectory_xz.svg");
  }

  static const char* kColors[] = {"#1f4e9c", "#c03030", "#2a7a2a", "#8030a0",
                                  "#d08020", "#307070"};
  {
    SvgPlot plot;
    plot.set_title(cfg.name + ": tracking error");
    plot.set_axis_labels("t [s]", "|e|");
    for (int i = 0; i < p; ++i) {
      std::vector<double> e;
      for (const auto& r : records) e.push_back(std::abs(r.y(i) - r.y_t(i)));
      plot.add_line(t, e, kColors[i % 6], "e" + std::to_string(i + 1));
    }
    plot.write(dir + "/error.svg");
  }
  {
    SvgPlot plot;
    plot.set_title(cfg.name + ": inputs");
    plot.set_axis_labels("t [s]", "u");
    for (int i = 0; i < cfg.model.m(); ++i) {
      std::vector<double> u;
      for (const auto& r : records) u.push_back(r.u(i));
      plot.add_line(t, u, kColors[i % 6], "u" + std::to_string(i + 1));
    }
    plot.write(dir + "/inputs.svg");
  }
  {
    SvgPlot plot;
    plot.set_title(cfg.name + ": outputs and artificial references");
    plot.set_axis_labels("t [s]", "y");
    for (int i = 0; i < p; ++i) {
      std::vector<double> y, ya;
      for (const auto& r : records) {
        y.push_back(r.y(i));
        ya.push_back(r.y_a(i));
      }
      plot.add_line(t, y, kColors[i % 6], "y" + std::to_string(i + 1));
      plot.add_line(t, ya, kColors[i % 6], "", true);
    }
    plot.write(dir + "/artificial.svg");
  }
  if (cfg.sensor_driven) {
    SvgPlot plot;
    plot.set_title(cfg.name + ": detected regions");
    plot.set_axis_labels("t [s]", "count");
    std::vector<double> c;
    for (const auto& r : records) c.push_back(r.n_regions);
    plot.add_line(t, c, "#1f4e9c", "regions");
    plot.write(dir + "/obstacles.svg");
  }
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg, bool write_artifacts) {
  {
    const auto issues = validate_config(cfg);
    if (!issues.empty())
      throw ConfigError("config invalid: " + issues.front().field + ": " +
                        issues.front().message);
  }
  OcpProblem pb = build_problem_template(cfg);
  Controller controller(pb);

  const int steps = static_cast<int>(std::round(cfg.duration / cfg.T_s));
  Vector x_abs = cfg.x0_abs;

  ScenarioResult result;
  result.output_dir = cfg.output_dir;
  result.records.reserve(steps);

  AvoidanceSpec model_static;
  if (!cfg.static_regions.empty())
    model_static = regions_to_model_frame(cfg, cfg.static_regions);

  int feasible_count = 0;
  for (int k = 0; k < steps; ++k) {
    const double time = k * cfg.T_s;
    Vector y_t_abs = cfg.targets.front().y;
    for (const auto& target : cfg.targets)
      if (target.time <= time + 1e-12) y_t_abs = target.y;

    AvoidanceSpec regions = model_static;
    if (cfg.sensor_driven) {
      regions = AvoidanceSpec{};
      regions.epsilon = cfg.epsilon;
      const auto spheres = sensor_scan(*cfg.map, x_abs.head(3), cfg.sensor);
      for (const auto& sphere : spheres) {
        AvoidRegion model_region = sphere;
        model_region.sigma = cfg.sensor_sigma;
        auto& s = std::get<SphereRegion>(model_region.shape);
        s.center -= cfg.y_eq.head(3);
        regions.regions.push_back(std::move(model_region));
        regions.mu.push_back(cfg.sensor_mu);
      }
    }

    auto [u_model, rec] =
        controller.control_step(cfg.to_model_state(x_abs),
                                cfg.to_model_output(y_t_abs), regions);
    const Vector u_abs = cfg.to_plant_input(u_model);

    // Log in absolute coordinates.
    rec.x = x_abs;
    rec.u = u_abs;
    rec.y = rec.y + cfg.y_eq;
    rec.y_t = y_t_abs;
    rec.x_a = rec.x_a + cfg.x_eq;
    rec.u_a = rec.u_a + cfg.u_eq;
    rec.y_a = rec.y_a + cfg.y_eq;
    if (rec.feasible) ++feasible_count;
    result.min_clearance = std::min(result.min_clearance, rec.min_clearance);
    result.records.push_back(rec);

    switch (cfg.plant_kind) {
      case PlantKind::linear:
        x_abs = cfg.model.A * x_abs + cfg.model.B * u_abs;
        break;
      case PlantKind::ball_on_plate:
        x_abs = rk4_step(cfg.ball_plate, x_abs, u_abs, cfg.T_s);
        break;
      case PlantKind::quadrotor:
        x_abs = rk4_step(cfg.quadrotor, x_abs, u_abs, cfg.T_s);
        break;
    }
  }

  const StepRecord& last = result.records.back();
  result.final_error = (last.y - last.y_t).norm();
  result.feasibility_rate =
      static_cast<double>(feasible_count) / std::max(1, steps);
  double s_bound = 0.0;
  if (!model_static.empty()) {
    s_bound = estimate_bound_S(model_static, output_box(cfg), cfg.N, 4096);
  } else if (cfg.sensor_driven) {
    // Hinge maximum sits at a sphere center: F <= (sigma^2 r^2)^2 per
    // region, at most one region per obstacle.
    const double r2 = cfg.sensor_sigma * cfg.sensor_sigma *
                      cfg.sensor.emitted_radius * cfg.sensor.emitted_radius;
    s_bound = 1.1 * (cfg.N + 2) * cfg.map->obstacles.size() *
              cfg.sensor_mu * r2 * r2;
  }
  result.iss = iss_diagnostics(result.records, s_bound);

  if (write_artifacts) {
    std::filesystem::create_directories(cfg.output_dir);
    TrajectoryWriter writer(cfg.output_dir + "/trajectory.csv", cfg.model.n(),
                            cfg.model.m(), cfg.model.p(), cfg.T_s);
    for (const auto& rec : result.records) writer.append(rec);
    writer.close();

    std::ofstream summary(cfg.output_dir + "/summary.txt");
    int max_sqp = 0, max_qp = 0;
    double sum_sqp = 0, sum_qp = 0;
    for (const auto& rec : result.records) {
      max_sqp = std::max(max_sqp, rec.sqp_iterations);
      max_qp = std::max(max_qp, rec.qp_iterations);
      sum_sqp += rec.sqp_iterations;
      sum_qp += rec.qp_iterations;
    }
    summary << "scenario: " << cfg.name << "\n"
            << "steps: " << steps << "\n"
            << "final_tracking_error: " << result.final_error << "\n"
            << "min_clearance: " << result.min_clearance << "\n"
            << "feasibility_rate: " << result.feasibility_rate << "\n"
            << "sqp_iters_mean: " << sum_sqp / steps << "\n"
            << "sqp_iters_max: " << max_sqp << "\n"
            << "qp_iters_mean: " << sum_qp / steps << "\n"
            << "qp_iters_max: " << max_qp << "\n"
            << "final_v_avoid: " << last.v_avoid << "\n"
            << "estimated_S: " << result.iss.s_bound << "\n"
            << "monitor_violations: " << result.iss.violations << "\n";
    write_plots(cfg, result.records, cfg.output_dir);
  }
  return result;
}

std::vector<DoaProbeResult> run_probe(const ScenarioConfig& cfg,
                                      bool write_artifacts) {
  if (!cfg.probe) throw ConfigError("probe: section missing");
  const ProbeSpec& spec = *cfg.probe;
  OcpProblem pb = build_problem_template(cfg);

  std::vector<Vector> grid;
  const Vector base = cfg.to_model_state(cfg.x0_abs);
  std::vector<int> idx(spec.dims.size(), 0);
  for (;;) {
    Vector x0 = base;
    for (size_t d = 0; d < spec.dims.size(); ++d) {
      const double frac =
          spec.count[d] > 1
              ? static_cast<double>(idx[d]) / (spec.count[d] - 1)
              : 0.5;
      x0(spec.dims[d]) = spec.lo(d) + frac * (spec.hi(d) - spec.lo(d));
    }
    grid.push_back(x0);
    size_t d = 0;
    for (; d < idx.size(); ++d) {
      if (++idx[d] < spec.count[d]) break;
      idx[d] = 0;
    }
    if (d == idx.size()) break;
  }

  auto results = domain_of_attraction_probe(pb, grid);
  if (write_artifacts) {
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream out(cfg.output_dir + "/doa.csv");
    for (int i = 0; i < cfg.model.n(); ++i) out << "x" << i << ',';
    out << "feasible\n";
    char buf[40];
    for (const auto& r : results) {
      for (int i = 0; i < r.x0.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.x0(i) + cfg.x_eq(i));
        out << buf << ',';
      }
      out << (r.feasible ? 1 : 0) << '\n';
    }
  }
  return results;
}

}  // namespace stmpc
