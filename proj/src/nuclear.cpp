#include "rankstat/nuclear.hpp"

#include <algorithm>
#include <cmath>

namespace rankstat {

NuclearMembership nuclear_membership(const Matrix& X, const Matrix& W, double tol) {
  if (X.rows() != W.rows() || X.cols() != W.cols()) throw Error(ErrorKind::InvalidInput, "shape mismatch");
  NuclearMembership r;
  const double nx = nuclear_norm(X);
  r.gap = nx - (W.array() * X.array()).sum();
  r.specnorm_excess = std::max(0.0, spectral_norm(W) - 1.0);
  r.member = std::abs(r.gap) <= tol * std::max(1.0, nx) && r.specnorm_excess <= tol;
  return r;
}

Matrix nuclear_representative(const SvdFrame& f, int rank, double t) {
  const int m = static_cast<int>(f.U.rows());
  const int n = static_cast<int>(f.V.rows());
  Matrix D = Matrix::Zero(m, n);
  for (int i = 0; i < m; ++i) D(i, i) = i < rank ? 1.0 : t;
  return f.U * D * f.V.transpose();
}

Matrix nuclear_representative(const Matrix& X, double t, double class_tol) {
  if (class_tol <= 0) class_tol = default_class_tol(X);
  SvdFrame f = svd(X, class_tol);
  return nuclear_representative(f, numerical_rank(f.sigma, class_tol), t);
}

Matrix prox_nuclear(const Matrix& Z, double tau) {
  if (!(tau > 0)) throw Error(ErrorKind::InvalidInput, "tau must be positive");
  if (Z.rows() > Z.cols()) return prox_nuclear(Z.transpose(), tau).transpose();
  SvdFrame f = svd(Z, 1e-12);
  const int m = static_cast<int>(Z.rows());
  Matrix D = Matrix::Zero(m, Z.cols());
  for (int i = 0; i < m; ++i) D(i, i) = std::max(f.sigma(i) - tau, 0.0);
  return f.U * D * f.V.transpose();
}

RankSubdiffMembership rank_subdiff_membership(const Matrix& Xbar, const Matrix& M, double tol, double class_tol) {
  if (Xbar.rows() != M.rows() || Xbar.cols() != M.cols()) throw Error(ErrorKind::InvalidInput, "shape mismatch");
  if (class_tol <= 0) class_tol = default_class_tol(Xbar);
  SvdFrame f = svd(Xbar, class_tol);
  RankSubdiffMembership r;
  r.rank = numerical_rank(f.sigma, class_tol);
  const Matrix U1 = f.U.leftCols(r.rank);
  const Matrix V1 = f.V.leftCols(r.rank);
  r.left_residual = (U1.transpose() * M).norm();
  r.right_residual = (M * V1).norm();
  const double scale = tol * std::max(1.0, M.norm());
  r.member = r.left_residual <= scale && r.right_residual <= scale;
  return r;
}

Matrix project_rank_subdiff(const Matrix& Xbar, const Matrix& M, double class_tol) {
  if (class_tol <= 0) class_tol = default_class_tol(Xbar);
  SvdFrame f = svd(Xbar, class_tol);
  const int r = numerical_rank(f.sigma, class_tol);
  const Matrix U2 = f.U.rightCols(f.U.cols() - r);
  const Matrix V2 = f.V.rightCols(f.V.cols() - r);
  return U2 * (U2.transpose() * M * V2) * V2.transpose();
}

}  // namespace rankstat
