#pragma once

#include <variant>
#include <vector>

#include "stmpc/polytope.hpp"

namespace stmpc {

/// Ball that outputs must stay out of. The center may have fewer
/// coordinates than the output; it then applies to the leading block
/// (a position sphere seen by a sensor while the output also carries yaw).
struct SphereRegion {
  Vector center;
  double radius = 0.0;
};

/// One ellipse of the union whose complement is penalized:
/// g_i(y) = (y - c_i)' E_i (y - c_i) - 1 + gamma_i.
struct EllipseTerm {
  Matrix E;
  Vector center;
  double gamma = 0.0;
};

/// Penalizes the complement of a union of ellipsoids via the product of
/// the hinge factors: F = (prod_i max{0, g_i})^eps. Zero inside any ellipse
/// shrunk by its margin.
struct EllipsoidUnionComplement {
  std::vector<EllipseTerm> terms;
};

/// Region {y : a_j' y <= b_j for all j}; F = sum_j max{0, b_j - a_j'y}^eps.
struct HalfspaceIntersection {
  Matrix A;
  Vector b;
};

struct AvoidRegion {
  std::variant<SphereRegion, EllipsoidUnionComplement, HalfspaceIntersection>
      shape;
  double sigma = 1.0;  // safety enclosure factor >= 1
};

struct AvoidanceSpec {
  std::vector<AvoidRegion> regions;
  std::vector<double> mu;
  double epsilon = 2.0;
  double S = 0.0;  // diagnostic bound on the avoidance cost

  bool empty() const { return regions.empty(); }
  void check() const;
};

/// F(y, O_i): zero outside the (enclosed) region, positive and C^1 inside
/// for eps = 2.
double penalty_value(const AvoidRegion& region, const Vector& y,
                     double epsilon = 2.0);

/// Analytic gradient of penalty_value; eps = 2 only.
Vector penalty_gradient(const AvoidRegion& region, const Vector& y,
                        double epsilon = 2.0);

/// Gauss-Newton data for one region at one output point: F = rho^2 with
/// gradient 2 rho * jac. jac is zero wherever the hinge is inactive.
struct PenaltyResidual {
  double rho = 0.0;
  Vector jac;
};
PenaltyResidual penalty_residual(const AvoidRegion& region, const Vector& y);

/// V_av = sum_i mu_i [ F(y_a, O_i) + sum_{j=0..N} F(y(j), O_i) ].
double avoidance_cost(const AvoidanceSpec& spec,
                      const std::vector<Vector>& y_seq, const Vector& y_a);

/// Sampled estimate of S = sup V_av over the admissible output set:
/// (N+2) * sum_i mu_i * max_samples F, inflated by 1.1. Quasi-random
/// (Halton) samples in Y. Diagnostics only.
double estimate_bound_S(const AvoidanceSpec& spec, const Polytope& Y,
                        int horizon, int samples);

/// Sampling check that a region stays strictly inside Y (used for static
/// configured regions).
bool region_inside_output_set(const AvoidRegion& region, const Polytope& Y,
                              int samples = 4096);

}  // namespace stmpc
