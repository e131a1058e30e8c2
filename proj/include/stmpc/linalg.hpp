#pragma once

#include <Eigen/Dense>

namespace stmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Numerical rank from singular values with a relative threshold
/// tol * sigma_max (default 1e-10).
int numeric_rank(const Matrix& M, double rel_tol = 1e-10);

/// Largest eigenvalue magnitude.
double spectral_radius(const Matrix& A);

bool is_schur(const Matrix& A, double margin = 1e-9);

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// below -tol throw, small negatives are clamped to zero.
Matrix psd_sqrt(const Matrix& Q, double tol = 1e-10);

/// [B, AB, ..., A^{s-1}B]; s defaults to n.
Matrix controllability_matrix(const Matrix& A, const Matrix& B, int steps = -1);

/// [C; CA; ...; CA^{n-1}]
Matrix observability_matrix(const Matrix& A, const Matrix& C);

/// Moore-Penrose pseudoinverse (SVD, relative cutoff 1e-12).
Matrix pinv(const Matrix& M, double rel_tol = 1e-12);

/// Orthonormal basis of the null space of M (columns).
Matrix null_space_basis(const Matrix& M, double rel_tol = 1e-10);

}  // namespace stmpc
