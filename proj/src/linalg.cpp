#include "stmpc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "stmpc/errors.hpp"

namespace stmpc {

int numeric_rank(const Matrix& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cut = rel_tol * s(0);
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++r;
  return r;
}

double spectral_radius(const Matrix& A) {
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_schur(const Matrix& A, double margin) {
  return spectral_radius(A) < 1.0 - margin;
}

Matrix psd_sqrt(const Matrix& Q, double tol) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(Q);
  Vector ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol * scale)
      throw Error("psd_sqrt: matrix has a negative eigenvalue");
    ev(i) = std::sqrt(std::max(0.0, ev(i)));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Matrix controllability_matrix(const Matrix& A, const Matrix& B, int steps) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  const int s = steps < 0 ? n : steps;
  Matrix Co(n, s * m);
  Matrix AkB = B;
  for (int k = 0; k < s; ++k) {
    Co.middleCols(k * m, m) = AkB;
    AkB = A * AkB;
  }
  return Co;
}

Matrix observability_matrix(const Matrix& A, const Matrix& C) {
  const int n = static_cast<int>(A.rows());
  const int p = static_cast<int>(C.rows());
  Matrix Ob(n * p, n);
  Matrix CAk = C;
  for (int k = 0; k < n; ++k) {
    Ob.middleRows(k * p, p) = CAk;
    CAk = CAk * A;
  }
  return Ob;
}

Matrix pinv(const Matrix& M, double rel_tol) {
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cut = s.size() > 0 ? rel_tol * s(0) : 0.0;
  Vector si = Vector::Zero(s.size());
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > cut) si(i) = 1.0 / s(i);
  return svd.matrixV() * si.asDiagonal() * svd.matrixU().transpose();
}

Matrix null_space_basis(const Matrix& M, double rel_tol) {
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cut = s.size() > 0 && s(0) > 0 ? rel_tol * s(0) : 0.0;
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++r;
  return svd.matrixV().rightCols(M.cols() - r);
}

}  // namespace stmpc
