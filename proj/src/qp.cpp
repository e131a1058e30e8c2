#include "stmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "stmpc/errors.hpp"

namespace stmpc {

QpResult solve_qp(const DenseQp& qp, const Vector& x0, const QpOptions& opts,
                  const std::vector<int>* warm_working_set) {
  const int D = static_cast<int>(qp.G.rows());
  const int me = static_cast<int>(qp.E.rows());
  const int mi = static_cast<int>(qp.A.rows());

  QpResult res;
  res.x = x0;

  Eigen::LLT<Matrix> Gllt(qp.G);
  if (Gllt.info() != Eigen::Success) {
    res.status = QpStatus::failed;
    return res;
  }

  const double feas_scale =
      1.0 + std::max(qp.b.size() ? qp.b.cwiseAbs().maxCoeff() : 0.0,
                     qp.e.size() ? qp.e.cwiseAbs().maxCoeff() : 0.0);
  if (me > 0 && (qp.E * x0 - qp.e).cwiseAbs().maxCoeff() >
                    opts.feas_tol * feas_scale) {
    res.status = QpStatus::infeasible_start;
    return res;
  }
  if (mi > 0 &&
      (qp.A * x0 - qp.b).maxCoeff() > opts.feas_tol * feas_scale) {
    res.status = QpStatus::infeasible_start;
    return res;
  }

  // Deterministic row-wise relaxation of the inequality offsets breaks
  // degenerate vertex ties (the source of active-set zigzag). The solved
  // problem differs from the stated one by at most ~1e-10 in each slack.
  Vector b = qp.b;
  for (int i = 0; i < mi; ++i)
    b(i) += 1e-10 * feas_scale * (1.0 + static_cast<double>(i % 97) / 97.0);

  // Working set: inequality rows held as equalities, seeded with the rows
  // active at the start point plus any supplied warm rows. Warm rows need
  // not be active; they are pruned at stationarity before optimality can
  // be declared, so reusing the previous solve's set just skips the
  // one-row-per-iteration discovery phase.
  std::vector<int> W;
  std::vector<char> in_W(mi, 0);
  if (mi > 0) {
    const Vector slack = b - qp.A * res.x;
    for (int i = 0; i < mi; ++i)
      if (slack(i) <= 1e-11 * feas_scale) {
        W.push_back(i);
        in_W[i] = 1;
      }
    if (warm_working_set) {
      for (int i : *warm_working_set) {
        if (i < 0 || i >= mi || in_W[i]) continue;
        if (static_cast<int>(W.size()) >= D - me - 1) break;
        W.push_back(i);
        in_W[i] = 1;
      }
    }
  }

  const int cap = opts.max_iterations > 0 ? opts.max_iterations
                                          : 40 * (mi + me + D) + 200;
  int zero_steps = 0;

  for (int iter = 0; iter < cap; ++iter) {
    res.iterations = iter + 1;
    const int k = me + static_cast<int>(W.size());
    const Vector g = qp.G * res.x + qp.c;

    // Null-space solve of the equality-constrained subproblem keeps the
    // stationary step exactly zero at optima (no regularization smear).
    Vector nu = Vector::Zero(k);  // stacked duals for [E; A_W]
    Vector p;
    if (k == 0) {
      p = -Gllt.solve(g);
    } else {
      Matrix Ct(D, k);  // columns are constraint normals
      for (int r = 0; r < me; ++r) Ct.col(r) = qp.E.row(r).transpose();
      for (size_t r = 0; r < W.size(); ++r)
        Ct.col(me + r) = qp.A.row(W[r]).transpose();
      Eigen::ColPivHouseholderQR<Matrix> qr(Ct);
      const int rank = static_cast<int>(qr.rank());
      // Particular step restoring any equality drift.
      Vector r_c = Vector::Zero(k);
      if (me > 0) r_c.head(me) = qp.e - qp.E * res.x;
      Vector p0 = Vector::Zero(D);
      if (r_c.cwiseAbs().maxCoeff() > 0.0) {
        // Minimum-norm solution of C p0 = r_c.
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Ct.transpose());
        p0 = cod.solve(r_c);
      }
      if (rank >= D) {
        p = p0;
      } else {
        const Matrix Qfull = qr.householderQ();
        const Matrix Zn = Qfull.rightCols(D - rank);
        const Matrix GZ = qp.G * Zn;
        const Vector rhs = -Zn.transpose() * (g + qp.G * p0);
        const Vector pz =
            Eigen::LLT<Matrix>(Zn.transpose() * GZ).solve(rhs);
        p = p0 + Zn * pz;
      }
      nu = qr.solve(-(g + qp.G * p));
    }

    const double step_scale = 1.0 + res.x.cwiseAbs().maxCoeff();
    // On the working face the step satisfies g'p = -p'Gp, so the model
    // decrease is 0.5 p'Gp. Ill-conditioned Hessians cannot push the step
    // norm to zero; the decrease test is the scale-aware stationarity
    // criterion.
    const double qval = 0.5 * res.x.dot(g) + 0.5 * qp.c.dot(res.x);
    const double pred_decrease = 0.5 * p.dot(qp.G * p);
    if (p.cwiseAbs().maxCoeff() <= opts.step_tol * step_scale ||
        pred_decrease <= 1e-13 * (1.0 + std::abs(qval))) {
      // Stationary on the working face. Warm rows that are not actually
      // active carry no KKT meaning: prune them first.
      if (mi > 0 && !W.empty()) {
        const Vector slack = b - qp.A * res.x;
        int prune = -1;
        for (size_t r = 0; r < W.size(); ++r)
          if (slack(W[r]) > 1e-8 * feas_scale) {
            prune = static_cast<int>(r);
            break;
          }
        if (prune >= 0) {
          in_W[W[prune]] = 0;
          W.erase(W.begin() + prune);
          continue;
        }
      }
      // Multiplier signs decide optimality.
      int drop = -1;
      const double mtol = opts.mult_tol * (1.0 + g.cwiseAbs().maxCoeff());
      if (zero_steps > 8) {
        // Bland-style tie-break after stalls.
        for (size_t r = 0; r < W.size(); ++r)
          if (nu(me + r) < -mtol) {
            drop = static_cast<int>(r);
            break;
          }
      } else {
        double most_neg = -mtol;
        for (size_t r = 0; r < W.size(); ++r)
          if (nu(me + r) < most_neg) {
            most_neg = nu(me + r);
            drop = static_cast<int>(r);
          }
      }
      if (drop < 0) {
        res.status = QpStatus::optimal;
        res.eq_duals = k > 0 ? Vector(nu.head(me)) : Vector::Zero(me);
        res.ineq_duals = Vector::Zero(mi);
        for (size_t r = 0; r < W.size(); ++r)
          res.ineq_duals(W[r]) = std::max(0.0, nu(me + r));
        res.working_set = W;
        return res;
      }
      in_W[W[drop]] = 0;
      W.erase(W.begin() + drop);
      ++zero_steps;
      continue;
    }

    // Ratio test against rows outside the working set.
    double alpha = 1.0;
    int block = -1;
    if (mi > 0) {
      const Vector Ap = qp.A * p;
      const Vector slack = b - qp.A * res.x;
      for (int i = 0; i < mi; ++i) {
        if (in_W[i]) continue;
        if (Ap(i) > 1e-12) {
          const double ratio = std::max(0.0, slack(i)) / Ap(i);
          if (ratio < alpha - 1e-16) {
            alpha = ratio;
            block = i;
          }
        }
      }
    }
    res.x += alpha * p;
    if (block >= 0) {
      W.push_back(block);
      in_W[block] = 1;
    }
    zero_steps = (alpha <= 1e-14) ? zero_steps + 1 : 0;
    if (zero_steps > 4 * (D + me + 8)) {
      res.status = QpStatus::failed;
      res.working_set = W;
      return res;
    }
  }
  res.status = QpStatus::max_iterations;
  res.working_set = W;
  return res;
}

Phase1Result qp_phase1(const Matrix& E, const Vector& e, const Matrix& A,
                       const Vector& b, const Vector* hint, double tol) {
  const int D = static_cast<int>(A.cols());
  const int me = static_cast<int>(E.rows());
  const int mi = static_cast<int>(A.rows());

  Vector d0 = hint ? *hint : Vector::Zero(D);
  if (me > 0) {
    const Vector r = e - E * d0;
    if (r.cwiseAbs().maxCoeff() > 1e-12)
      d0 += pinv(E) * r;  // least-squares restoration of the equalities
  }

  Phase1Result out;
  const double viol0 =
      mi > 0 ? std::max(0.0, (A * d0 - b).maxCoeff()) : 0.0;
  if (viol0 <= tol) {
    out.feasible = true;
    out.x = d0;
    out.max_violation = viol0;
    return out;
  }

  // Elastic problem over (d, t): min t + eps*||.||^2 with A d - t <= b,
  // t >= 0, E d = e. Start (d0, viol0 + 1) is strictly feasible.
  DenseQp qp;
  qp.G = Matrix::Identity(D + 1, D + 1) * 1e-8;
  qp.c = Vector::Zero(D + 1);
  qp.c(D) = 1.0;
  qp.E = Matrix::Zero(me, D + 1);
  if (me > 0) qp.E.leftCols(D) = E;
  qp.e = e;
  qp.A = Matrix::Zero(mi + 1, D + 1);
  qp.A.topLeftCorner(mi, D) = A;
  qp.A.col(D).head(mi).setConstant(-1.0);
  qp.A(mi, D) = -1.0;
  qp.b = Vector::Zero(mi + 1);
  qp.b.head(mi) = b;

  Vector start(D + 1);
  start.head(D) = d0;
  start(D) = viol0 + 1.0;
  QpOptions opts;
  const QpResult res = solve_qp(qp, start, opts);

  out.x = res.x.head(D);
  out.max_violation =
      mi > 0 ? std::max(0.0, (A * out.x - b).maxCoeff()) : 0.0;
  out.feasible = (res.status == QpStatus::optimal ||
                  res.status == QpStatus::max_iterations) &&
                 out.max_violation <= tol;
  return out;
}

}  // namespace stmpc
