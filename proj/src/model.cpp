#include "stmpc/model.hpp"

#include <cmath>

#include "stmpc/errors.hpp"

namespace stmpc {

void LinearModel::check_dimensions() const {
  if (A.rows() != A.cols()) throw DimensionError("A must be square");
  if (B.rows() != A.rows()) throw DimensionError("B rows must match A");
  if (C.cols() != A.cols()) throw DimensionError("C cols must match A");
  if (D.rows() != C.rows() || D.cols() != B.cols())
    throw DimensionError("D must be p x m");
}

LinearModel LinearModel::make_checked(Matrix A, Matrix B, Matrix C, Matrix D) {
  LinearModel model{std::move(A), std::move(B), std::move(C), std::move(D)};
  model.check_dimensions();
  if (numeric_rank(controllability_matrix(model.A, model.B)) < model.n())
    throw Error("model is not controllable");
  if (numeric_rank(observability_matrix(model.A, model.C)) < model.n())
    throw Error("model is not observable");
  return model;
}

RankConditionReport check_rank_condition(const LinearModel& model) {
  const int n = model.n(), m = model.m(), p = model.p();
  Matrix M(n + p, n + m);
  M.topLeftCorner(n, n) = model.A - Matrix::Identity(n, n);
  M.topRightCorner(n, m) = model.B;
  M.bottomLeftCorner(p, n) = model.C;
  M.bottomRightCorner(p, m) = model.D;
  RankConditionReport rep;
  rep.rank = numeric_rank(M, 1e-10);
  rep.holds = (rep.rank == n + p);
  rep.shape = (p == m) ? SystemShape::square
                       : (p < m ? SystemShape::flat : SystemShape::thin);
  return rep;
}

SteadyStateMap::SteadyStateMap(const LinearModel& model, const Polytope& Z,
                               double lambda)
    : model_(model), Z_(Z), lambda_(lambda) {
  model_.check_dimensions();
  if (!(lambda > 0.0 && lambda < 1.0))
    throw Error("lambda must lie in (0,1)");
  if (Z.dim() != model.n() + model.m())
    throw DimensionError("Z must live in the (x,u) space");
  const int n = model.n(), m = model.m(), p = model.p();
  Matrix eq(n, n + m);
  eq.leftCols(n) = model.A - Matrix::Identity(n, n);
  eq.rightCols(m) = model.B;
  basis_ = null_space_basis(eq);

  Matrix full(n + p, n + m);
  full.topRows(n) = eq;
  full.bottomLeftCorner(p, n) = model.C;
  full.bottomRightCorner(p, m) = model.D;
  particular_ = pinv(full).rightCols(p);
}

SteadyStatePair SteadyStateMap::steady_state_for_output(
    const Vector& y_t) const {
  const int n = model_.n(), m = model_.m();
  const Vector z = particular_ * y_t;
  SteadyStatePair out;
  out.x_s = z.head(n);
  out.u_s = z.tail(m);
  const double res_eq = equilibrium_residual(out.x_s, out.u_s);
  const double res_out =
      (model_.C * out.x_s + model_.D * out.u_s - y_t).norm();
  if (res_eq > 1e-9 || res_out > 1e-9)
    throw InfeasibleTarget("no equilibrium matches the target output");
  out.in_lambda_zs = in_lambda_zs(out.x_s, out.u_s);
  return out;
}

double SteadyStateMap::equilibrium_residual(const Vector& x_s,
                                            const Vector& u_s) const {
  return ((model_.A - Matrix::Identity(model_.n(), model_.n())) * x_s +
          model_.B * u_s)
      .norm();
}

bool SteadyStateMap::in_lambda_zs(const Vector& x_s, const Vector& u_s,
                                  double tol) const {
  return equilibrium_residual(x_s, u_s) <= tol &&
         lambda_zs_violation(x_s, u_s) <= tol;
}

double SteadyStateMap::lambda_zs_violation(const Vector& x_s,
                                           const Vector& u_s) const {
  Vector z(x_s.size() + u_s.size());
  z << x_s, u_s;
  return (Z_.H * z - lambda_ * Z_.h).maxCoeff();
}

Polytope SteadyStateMap::theta_set() const {
  Polytope T;
  T.H = Z_.H * basis_;
  T.h = lambda_ * Z_.h;
  return T;
}

Polytope reachable_output_set(const SteadyStateMap& map) {
  const LinearModel& model = map.model();
  const int p = model.p();
  Matrix CD(p, model.n() + model.m());
  CD.leftCols(model.n()) = model.C;
  CD.rightCols(model.m()) = model.D;
  const Matrix out_map = CD * map.basis();  // p x r
  Polytope theta = map.theta_set();
  theta.normalize_rows();
  const int r = theta.dim();

  if (r <= 2 && p <= 2 && r >= p) {
    // Exact: vertices of the theta polytope mapped through the output map.
    std::vector<Vector> verts = theta.vertices_2d();
    if (p == 1) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (const auto& v : verts) {
        const double y = (out_map * v)(0);
        lo = std::min(lo, y);
        hi = std::max(hi, y);
      }
      Polytope Yr;
      Yr.H = Matrix(2, 1);
      Yr.h = Vector(2);
      Yr.H << 1.0, -1.0;
      Yr.h << hi, -lo;
      return Yr;
    }
    std::vector<Vector> pts;
    pts.reserve(verts.size());
    for (const auto& v : verts) pts.push_back(out_map * v);
    Polytope Yr = hull_to_halfspaces_2d(convex_hull_2d(pts));
    Yr.remove_redundant();
    return Yr;
  }

  // Outer support-sampled approximation: axis directions plus a fixed
  // deterministic sphere sweep.
  std::vector<Vector> dirs;
  for (int i = 0; i < p; ++i) {
    Vector e = Vector::Zero(p);
    e(i) = 1.0;
    dirs.push_back(e);
    dirs.push_back(-e);
  }
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int extra = 16 * p * p;
  for (int k = 0; k < extra; ++k) {
    Vector d(p);
    for (int i = 0; i < p; ++i) d(i) = gauss(rng);
    if (d.norm() > 1e-9) dirs.push_back(d / d.norm());
  }
  Polytope Yr;
  Yr.H = Matrix(dirs.size(), p);
  Yr.h = Vector(dirs.size());
  for (size_t k = 0; k < dirs.size(); ++k) {
    const Vector c_theta = out_map.transpose() * dirs[k];
    Yr.H.row(k) = dirs[k].transpose();
    Yr.h(k) = lp_maximize(theta.H, theta.h, c_theta).value;
  }
  Yr.remove_redundant();
  return Yr;
}

ContinuousLinearization linearize(const VectorField& f, const OutputMap& out,
                                  const Vector& x_eq, const Vector& u_eq,
                                  double step) {
  const Vector f0 = f(x_eq, u_eq);
  if (f0.norm() > 1e-6)
    throw NonEquilibrium("linearize: point is not an equilibrium");
  const int n = static_cast<int>(x_eq.size());
  const int m = static_cast<int>(u_eq.size());
  const Vector y0 = out(x_eq, u_eq);
  const int p = static_cast<int>(y0.size());

  auto column_step = [&](double coord) {
    return step * std::max(1.0, std::abs(coord));
  };

  ContinuousLinearization ct;
  ct.A = Matrix::Zero(n, n);
  ct.B = Matrix::Zero(n, m);
  ct.C = Matrix::Zero(p, n);
  ct.D = Matrix::Zero(p, m);
  for (int i = 0; i < n; ++i) {
    const double hi = column_step(x_eq(i));
    Vector xp = x_eq, xm = x_eq;
    xp(i) += hi;
    xm(i) -= hi;
    ct.A.col(i) = (f(xp, u_eq) - f(xm, u_eq)) / (2.0 * hi);
    ct.C.col(i) = (out(xp, u_eq) - out(xm, u_eq)) / (2.0 * hi);
  }
  for (int j = 0; j < m; ++j) {
    const double hj = column_step(u_eq(j));
    Vector up = u_eq, um = u_eq;
    up(j) += hj;
    um(j) -= hj;
    ct.B.col(j) = (f(x_eq, up) - f(x_eq, um)) / (2.0 * hj);
    ct.D.col(j) = (out(x_eq, up) - out(x_eq, um)) / (2.0 * hj);
  }
  return ct;
}

LinearModel euler_discretize(const ContinuousLinearization& ct, double T_s) {
  if (!(T_s > 0.0)) throw Error("euler_discretize: T_s must be positive");
  LinearModel model;
  const int n = static_cast<int>(ct.A.rows());
  model.A = Matrix::Identity(n, n) + T_s * ct.A;
  model.B = T_s * ct.B;
  model.C = ct.C;
  model.D = ct.D;
  return model;
}

}  // namespace stmpc
