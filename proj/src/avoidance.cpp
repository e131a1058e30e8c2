#include "stmpc/avoidance.hpp"

#include <cmath>

#include "stmpc/errors.hpp"

namespace stmpc {

namespace {

double halton(int index, int base) {
  double f = 1.0, r = 0.0;
  int i = index;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

constexpr int kHaltonPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

// Hinge factors shared by value, gradient, and Gauss-Newton residual.
// rho is the product of active hinges; jac its gradient (zero when any
// factor clamps).
PenaltyResidual product_residual(const std::vector<double>& g,
                                 const std::vector<Vector>& grad_g, int dim) {
  PenaltyResidual out;
  out.jac = Vector::Zero(dim);
  double prod = 1.0;
  for (double gi : g) prod *= std::max(0.0, gi);
  out.rho = prod;
  if (prod > 0.0) {
    for (size_t i = 0; i < g.size(); ++i) {
      double others = 1.0;
      for (size_t j = 0; j < g.size(); ++j)
        if (j != i) others *= std::max(0.0, g[j]);
      out.jac += others * grad_g[i];
    }
  }
  return out;
}

}  // namespace

void AvoidanceSpec::check() const {
  if (regions.size() != mu.size())
    throw DimensionError("avoidance: regions and mu lengths differ");
  for (double m : mu)
    if (!(m > 0.0)) throw Error("avoidance: weights mu must be positive");
  if (!(epsilon > 0.0)) throw Error("avoidance: epsilon must be positive");
  for (const auto& r : regions) {
    if (!(r.sigma >= 1.0)) throw Error("avoidance: sigma must be >= 1");
    if (const auto* s = std::get_if<SphereRegion>(&r.shape)) {
      if (!(s->radius > 0.0)) throw Error("avoidance: sphere radius <= 0");
    } else if (const auto* e =
                   std::get_if<EllipsoidUnionComplement>(&r.shape)) {
      for (const auto& t : e->terms) {
        Eigen::LLT<Matrix> llt(t.E);
        if (llt.info() != Eigen::Success)
          throw Error("avoidance: ellipse matrix must be positive definite");
      }
    } else if (const auto* hs =
                   std::get_if<HalfspaceIntersection>(&r.shape)) {
      if (hs->A.rows() != hs->b.size())
        throw DimensionError("avoidance: halfspace rows mismatch");
      if (r.sigma != 1.0)
        throw Error(
            "avoidance: enclosure scaling of halfspace regions is applied "
            "at configuration time; sigma must be 1 here");
    }
  }
}

PenaltyResidual penalty_residual(const AvoidRegion& region, const Vector& y) {
  const int p = static_cast<int>(y.size());
  PenaltyResidual out;
  out.jac = Vector::Zero(p);

  if (const auto* s = std::get_if<SphereRegion>(&region.shape)) {
    const int d = static_cast<int>(s->center.size());
    if (d > p) throw DimensionError("sphere center larger than output");
    const Vector diff = y.head(d) - s->center;
    const double r_eff = region.sigma * s->radius;
    const double g = r_eff * r_eff - diff.squaredNorm();
    out.rho = std::max(0.0, g);
    if (g > 0.0) out.jac.head(d) = -2.0 * diff;
    return out;
  }
  if (const auto* e = std::get_if<EllipsoidUnionComplement>(&region.shape)) {
    // sigma > 1 shrinks each ellipse (quadric scaled by sigma^2), which
    // enlarges the penalized complement.
    const double s2 = region.sigma * region.sigma;
    std::vector<double> g;
    std::vector<Vector> grad_g;
    for (const auto& t : e->terms) {
      const Vector diff = y - t.center;
      g.push_back(s2 * diff.dot(t.E * diff) - 1.0 + t.gamma);
      grad_g.push_back(2.0 * s2 * (t.E * diff));
    }
    return product_residual(g, grad_g, p);
  }
  const auto& hs = std::get<HalfspaceIntersection>(region.shape);
  std::vector<double> g;
  std::vector<Vector> grad_g;
  for (int j = 0; j < hs.A.rows(); ++j) {
    g.push_back(hs.b(j) - hs.A.row(j).dot(y));
    grad_g.push_back(-hs.A.row(j).transpose());
  }
  return product_residual(g, grad_g, p);
}

double penalty_value(const AvoidRegion& region, const Vector& y,
                     double epsilon) {
  const PenaltyResidual r = penalty_residual(region, y);
  if (epsilon == 2.0) return r.rho * r.rho;
  return std::pow(r.rho, epsilon);
}

Vector penalty_gradient(const AvoidRegion& region, const Vector& y,
                        double epsilon) {
  if (epsilon != 2.0)
    throw UnsupportedExponent("penalty_gradient requires epsilon = 2");
  const PenaltyResidual r = penalty_residual(region, y);
  return 2.0 * r.rho * r.jac;
}

double avoidance_cost(const AvoidanceSpec& spec,
                      const std::vector<Vector>& y_seq, const Vector& y_a) {
  double total = 0.0;
  for (size_t i = 0; i < spec.regions.size(); ++i) {
    double sum = penalty_value(spec.regions[i], y_a, spec.epsilon);
    for (const auto& y : y_seq)
      sum += penalty_value(spec.regions[i], y, spec.epsilon);
    total += spec.mu[i] * sum;
  }
  return total;
}

double estimate_bound_S(const AvoidanceSpec& spec, const Polytope& Y,
                        int horizon, int samples) {
  if (spec.empty()) return 0.0;
  const auto [lo, hi] = Y.bounding_box();
  const int p = Y.dim();
  double total = 0.0;
  std::vector<double> max_F(spec.regions.size(), 0.0);
  int accepted = 0;
  for (int idx = 1; accepted < samples && idx < 64 * samples + 1024; ++idx) {
    Vector y(p);
    for (int d = 0; d < p; ++d)
      y(d) = lo(d) + (hi(d) - lo(d)) * halton(idx, kHaltonPrimes[d % 12]);
    if (!Y.contains(y)) continue;
    ++accepted;
    for (size_t i = 0; i < spec.regions.size(); ++i)
      max_F[i] =
          std::max(max_F[i], penalty_value(spec.regions[i], y, spec.epsilon));
  }
  for (size_t i = 0; i < spec.regions.size(); ++i)
    total += spec.mu[i] * max_F[i];
  return 1.1 * (horizon + 2) * total;
}

bool region_inside_output_set(const AvoidRegion& region, const Polytope& Y,
                              int /*samples*/) {
  constexpr double margin = 1e-9;
  if (const auto* s = std::get_if<SphereRegion>(&region.shape)) {
    const double r_eff = region.sigma * s->radius;
    for (int k = 0; k < Y.rows(); ++k) {
      const int d = static_cast<int>(s->center.size());
      const Vector a_head = Y.H.row(k).head(d).transpose();
      double sup = Y.H.row(k).head(d).dot(s->center) + r_eff * a_head.norm();
      // Coordinates beyond the sphere block are unconstrained by the
      // region; containment is judged on the spanned block only.
      if (sup > Y.h(k) - margin && a_head.norm() > 1e-12) return false;
    }
    return true;
  }
  if (std::holds_alternative<EllipsoidUnionComplement>(region.shape)) {
    // The penalized set is Y minus a union of ellipses by construction.
    return true;
  }
  const auto& hs = std::get<HalfspaceIntersection>(region.shape);
  for (int k = 0; k < Y.rows(); ++k) {
    LpResult res;
    try {
      // The region polytope must admit an interior start; use its
      // Chebyshev-ish point: fall back to bounding-box center of Y.
      Vector start = Vector::Zero(Y.dim());
      if (((hs.A * start - hs.b).array() > 0).any()) return false;
      res = lp_maximize(hs.A, hs.b, Y.H.row(k).transpose(), &start);
    } catch (const LpError&) {
      return false;
    }
    if (res.value > Y.h(k) - margin) return false;
  }
  return true;
}

}  // namespace stmpc
