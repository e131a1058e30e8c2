#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "stmpc/linalg.hpp"

namespace stmpc {

/// Result of a linear program max c'z s.t. Hz <= h.
struct LpResult {
  bool optimal = false;
  double value = 0.0;
  Vector point;
};

/// Maximize c'z over the bounded polyhedron {z : Hz <= h} with a primal
/// active-set method. `start` must be feasible; defaults to the origin,
/// which every polytope produced by this library contains.
LpResult lp_maximize(const Matrix& H, const Vector& h, const Vector& c,
                     const Vector* start = nullptr);

/// Convex polyhedron in half-space form {z : Hz <= h}.
struct Polytope {
  Matrix H;
  Vector h;

  int dim() const { return static_cast<int>(H.cols()); }
  int rows() const { return static_cast<int>(H.rows()); }

  static Polytope box(const Vector& lo, const Vector& hi);

  bool contains(const Vector& z, double tol = 1e-9) const;
  double max_violation(const Vector& z) const;

  /// Scale every row to unit norm. Rows that vanish are dropped.
  void normalize_rows(double tol = 1e-12);

  /// Bounded support in every +/- coordinate direction.
  bool is_bounded() const;

  /// After row normalization, h > 0 means the origin is strictly inside.
  bool strictly_contains_origin(double margin = 1e-12) const;

  double support(const Vector& direction) const;

  /// Per-axis bounding box (pair of lo, hi).
  std::pair<Vector, Vector> bounding_box() const;

  /// Drop rows whose removal does not change the set. Uses one support LP
  /// per row with the candidate row relaxed by one unit to keep the LP
  /// bounded.
  void remove_redundant(double tol = 1e-9);

  /// Preimage under z = M w + v: {w : H(Mw + v) <= h}.
  Polytope affine_preimage(const Matrix& M, const Vector& v) const;

  /// Random point inside the set: a ray from the origin scaled by
  /// u^(1/dim) of the distance to the boundary. Requires the origin inside.
  Vector sample_interior(std::mt19937_64& rng) const;

  /// Vertices for dim() <= 2 by constraint-pair enumeration.
  std::vector<Vector> vertices_2d(double tol = 1e-9) const;
};

/// Stack two polytopes over independent variable blocks.
Polytope cartesian_product(const Polytope& a, const Polytope& b);

/// Convex hull of 2-D points (Andrew monotone chain), counter-clockwise.
std::vector<Vector> convex_hull_2d(std::vector<Vector> pts);

/// Half-space representation of the hull of 2-D points.
Polytope hull_to_halfspaces_2d(const std::vector<Vector>& hull);

}  // namespace stmpc
