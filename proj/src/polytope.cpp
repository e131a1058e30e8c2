#include "stmpc/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "stmpc/errors.hpp"

namespace stmpc {

namespace {

// Least-squares multipliers xi for c = Aw' xi, plus the residual direction
// s = c - Aw' xi (projection of c onto the null space of the working rows).
struct Projection {
  Vector s;
  Vector xi;
};

Projection project_onto_working(const Matrix& AwT, const Vector& c) {
  Projection out;
  if (AwT.cols() == 0) {
    out.s = c;
    out.xi = Vector();
    return out;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(AwT);
  out.xi = qr.solve(c);
  out.s = c - AwT * out.xi;
  return out;
}

}  // namespace

LpResult lp_maximize(const Matrix& H, const Vector& h, const Vector& c,
                     const Vector* start) {
  const int d = static_cast<int>(H.cols());
  const int q = static_cast<int>(H.rows());
  Vector x = start ? *start : Vector::Zero(d);
  if (((H * x - h).array() > 1e-7).any())
    throw LpError("lp_maximize: start point infeasible");

  std::vector<int> W;
  Matrix AwT(d, 0);
  const double dir_tol = 1e-11 * std::max(1.0, c.norm());
  const int cap = 60 * (q + d + 2);
  int stall = 0;

  for (int iter = 0; iter < cap; ++iter) {
    Projection pr = project_onto_working(AwT, c);
    if (pr.s.norm() > dir_tol) {
      // Ascent direction inside the working face; ratio test.
      const Vector Hs = H * pr.s;
      const Vector Hx = H * x;
      double alpha = std::numeric_limits<double>::infinity();
      int block = -1;
      for (int i = 0; i < q; ++i) {
        if (std::find(W.begin(), W.end(), i) != W.end()) continue;
        if (Hs(i) > 1e-12) {
          const double a = std::max(0.0, (h(i) - Hx(i)) / Hs(i));
          if (a < alpha - 1e-15) {
            alpha = a;
            block = i;
          }
        }
      }
      if (block < 0)
        throw LpError("lp_maximize: unbounded direction (polytope not bounded)");
      if (alpha < 1e-13) ++stall; else stall = 0;
      if (stall > q + d + 4)
        throw LpError("lp_maximize: stalled (degenerate polytope)");
      x += alpha * pr.s;
      W.push_back(block);
      AwT.conservativeResize(d, AwT.cols() + 1);
      AwT.col(AwT.cols() - 1) = H.row(block).transpose();
    } else {
      // Optimal over the current face unless a multiplier is negative.
      int drop = -1;
      double most_neg = -1e-11 * std::max(1.0, c.norm());
      for (int k = 0; k < static_cast<int>(W.size()); ++k) {
        if (pr.xi(k) < most_neg) {
          most_neg = pr.xi(k);
          drop = k;
        }
      }
      if (drop < 0) {
        LpResult res;
        res.optimal = true;
        res.value = c.dot(x);
        res.point = x;
        return res;
      }
      W.erase(W.begin() + drop);
      Matrix next(d, W.size());
      for (int k = 0; k < static_cast<int>(W.size()); ++k)
        next.col(k) = H.row(W[k]).transpose();
      AwT = next;
    }
  }
  throw LpError("lp_maximize: iteration cap reached");
}

Polytope Polytope::box(const Vector& lo, const Vector& hi) {
  const int d = static_cast<int>(lo.size());
  Polytope P;
  P.H = Matrix::Zero(2 * d, d);
  P.h = Vector::Zero(2 * d);
  for (int i = 0; i < d; ++i) {
    P.H(2 * i, i) = 1.0;
    P.h(2 * i) = hi(i);
    P.H(2 * i + 1, i) = -1.0;
    P.h(2 * i + 1) = -lo(i);
  }
  return P;
}

bool Polytope::contains(const Vector& z, double tol) const {
  return max_violation(z) <= tol;
}

double Polytope::max_violation(const Vector& z) const {
  if (rows() == 0) return 0.0;
  return (H * z - h).maxCoeff();
}

void Polytope::normalize_rows(double tol) {
  std::vector<int> keep;
  for (int i = 0; i < rows(); ++i) {
    const double n = H.row(i).norm();
    if (n > tol) keep.push_back(i);
  }
  Matrix Hn(keep.size(), dim());
  Vector hn(keep.size());
  for (size_t k = 0; k < keep.size(); ++k) {
    const double n = H.row(keep[k]).norm();
    Hn.row(k) = H.row(keep[k]) / n;
    hn(k) = h(keep[k]) / n;
  }
  H = Hn;
  h = hn;
}

bool Polytope::is_bounded() const {
  for (int i = 0; i < dim(); ++i) {
    for (double sgn : {1.0, -1.0}) {
      Vector c = Vector::Zero(dim());
      c(i) = sgn;
      try {
        lp_maximize(H, h, c);
      } catch (const LpError&) {
        return false;
      }
    }
  }
  return true;
}

bool Polytope::strictly_contains_origin(double margin) const {
  for (int i = 0; i < rows(); ++i) {
    const double n = H.row(i).norm();
    if (n < 1e-14) continue;
    if (h(i) / n <= margin) return false;
  }
  return true;
}

double Polytope::support(const Vector& direction) const {
  return lp_maximize(H, h, direction).value;
}

std::pair<Vector, Vector> Polytope::bounding_box() const {
  Vector lo(dim()), hi(dim());
  for (int i = 0; i < dim(); ++i) {
    Vector c = Vector::Zero(dim());
    c(i) = 1.0;
    hi(i) = support(c);
    c(i) = -1.0;
    lo(i) = -support(c);
  }
  return {lo, hi};
}

void Polytope::remove_redundant(double tol) {
  std::vector<bool> active(rows(), true);
  for (int i = 0; i < rows(); ++i) {
    int others = 0;
    for (int j = 0; j < rows(); ++j)
      if (active[j] && j != i) ++others;
    if (others == 0) continue;
    // Other active rows plus the candidate relaxed by 1 keep the LP bounded.
    Matrix Hr(others + 1, dim());
    Vector hr(others + 1);
    int k = 0;
    for (int j = 0; j < rows(); ++j) {
      if (!active[j] || j == i) continue;
      Hr.row(k) = H.row(j);
      hr(k) = h(j);
      ++k;
    }
    Hr.row(k) = H.row(i);
    hr(k) = h(i) + 1.0;
    const double v = lp_maximize(Hr, hr, H.row(i).transpose()).value;
    if (v <= h(i) + tol) active[i] = false;
  }
  int kept = 0;
  for (int i = 0; i < rows(); ++i)
    if (active[i]) ++kept;
  Matrix Hn(kept, dim());
  Vector hn(kept);
  int k = 0;
  for (int i = 0; i < rows(); ++i) {
    if (!active[i]) continue;
    Hn.row(k) = H.row(i);
    hn(k) = h(i);
    ++k;
  }
  H = Hn;
  h = hn;
}

Polytope Polytope::affine_preimage(const Matrix& M, const Vector& v) const {
  Polytope out;
  out.H = H * M;
  out.h = h - H * v;
  return out;
}

Vector Polytope::sample_interior(std::mt19937_64& rng) const {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector dir(dim());
  for (;;) {
    for (int i = 0; i < dim(); ++i) dir(i) = gauss(rng);
    const double n = dir.norm();
    if (n > 1e-12) {
      dir /= n;
      break;
    }
  }
  const Vector Hd = H * dir;
  double tmax = std::numeric_limits<double>::infinity();
  for (int i = 0; i < rows(); ++i)
    if (Hd(i) > 1e-14) tmax = std::min(tmax, h(i) / Hd(i));
  if (!std::isfinite(tmax))
    throw LpError("sample_interior: unbounded ray (polytope not bounded)");
  const double u = unif(rng);
  const double radial = std::pow(u, 1.0 / dim()) * (1.0 - 1e-9);
  return dir * (radial * tmax);
}

std::vector<Vector> Polytope::vertices_2d(double tol) const {
  if (dim() > 2) throw Error("vertices_2d: dimension must be <= 2");
  std::vector<Vector> verts;
  if (dim() == 1) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (int i = 0; i < rows(); ++i) {
      if (H(i, 0) > tol) hi = std::min(hi, h(i) / H(i, 0));
      else if (H(i, 0) < -tol) lo = std::max(lo, h(i) / H(i, 0));
    }
    Vector a(1), b(1);
    a << lo;
    b << hi;
    if (lo <= hi) {
      verts.push_back(a);
      verts.push_back(b);
    }
    return verts;
  }
  for (int i = 0; i < rows(); ++i) {
    for (int j = i + 1; j < rows(); ++j) {
      Eigen::Matrix2d M;
      M << H(i, 0), H(i, 1), H(j, 0), H(j, 1);
      if (std::abs(M.determinant()) < 1e-12) continue;
      Eigen::Vector2d rhs(h(i), h(j));
      Vector z = M.inverse() * rhs;
      if (contains(z, tol)) {
        bool dup = false;
        for (const auto& v : verts)
          if ((v - z).norm() < 1e-9) dup = true;
        if (!dup) verts.push_back(z);
      }
    }
  }
  return verts;
}

Polytope cartesian_product(const Polytope& a, const Polytope& b) {
  Polytope out;
  out.H = Matrix::Zero(a.rows() + b.rows(), a.dim() + b.dim());
  out.h = Vector::Zero(a.rows() + b.rows());
  out.H.topLeftCorner(a.rows(), a.dim()) = a.H;
  out.H.bottomRightCorner(b.rows(), b.dim()) = b.H;
  out.h.head(a.rows()) = a.h;
  out.h.tail(b.rows()) = b.h;
  return out;
}

std::vector<Vector> convex_hull_2d(std::vector<Vector> pts) {
  if (pts.size() < 3) return pts;
  std::sort(pts.begin(), pts.end(), [](const Vector& a, const Vector& b) {
    return a(0) < b(0) || (a(0) == b(0) && a(1) < b(1));
  });
  auto cross = [](const Vector& o, const Vector& a, const Vector& b) {
    return (a(0) - o(0)) * (b(1) - o(1)) - (a(1) - o(1)) * (b(0) - o(0));
  };
  std::vector<Vector> hull(2 * pts.size());
  int k = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 1e-14) --k;
    hull[k++] = pts[i];
  }
  const int lower = k + 1;
  for (int i = static_cast<int>(pts.size()) - 2; i >= 0; --i) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 1e-14) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

Polytope hull_to_halfspaces_2d(const std::vector<Vector>& hull) {
  Polytope P;
  const int n = static_cast<int>(hull.size());
  P.H = Matrix::Zero(n, 2);
  P.h = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    const Vector& a = hull[i];
    const Vector& b = hull[(i + 1) % n];
    // CCW polygon: outward normal is the edge rotated clockwise.
    Eigen::Vector2d nrm(b(1) - a(1), -(b(0) - a(0)));
    const double len = nrm.norm();
    if (len < 1e-14) continue;
    nrm /= len;
    P.H.row(i) = nrm.transpose();
    P.h(i) = nrm.dot(Eigen::Vector2d(a(0), a(1)));
  }
  return P;
}

}  // namespace stmpc
