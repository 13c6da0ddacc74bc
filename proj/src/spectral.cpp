#include "rankstat/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace rankstat {

namespace {

// Makes the entry of largest magnitude positive; ties resolved by first index.
double sign_of_dominant(const Eigen::Ref<const Vector>& v) {
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  return v(k) < 0 ? -1.0 : 1.0;
}

// Keeps the first `keep` columns of Q and replaces the rest by Gram-Schmidt
// over e_1, e_2, ... (two passes for stability).
void complete_basis(Matrix& Q, int keep) {
  const int n = static_cast<int>(Q.rows());
  int filled = keep;
  for (int e = 0; e < n && filled < n; ++e) {
    Vector v = Vector::Unit(n, e);
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j < filled; ++j) v -= Q.col(j).dot(v) * Q.col(j);
    }
    double nv = v.norm();
    if (nv > 1e-6) Q.col(filled++) = v / nv;
  }
}

std::vector<std::pair<int, int>> group_values(const Vector& s, double tol) {
  std::vector<std::pair<int, int>> groups;
  int i = 0;
  const int k = static_cast<int>(s.size());
  while (i < k) {
    int j = i + 1;
    while (j < k && std::abs(s(i) - s(j)) <= tol) ++j;
    groups.emplace_back(i, j);
    i = j;
  }
  return groups;
}

}  // namespace

Matrix SvdFrame::reconstruct() const {
  const int m = static_cast<int>(U.rows());
  const int n = static_cast<int>(V.rows());
  Matrix S = Matrix::Zero(m, n);
  for (int i = 0; i < m; ++i) S(i, i) = sigma(i);
  return U * S * V.transpose();
}

Index IndexSets::gamma() const { return concat(gamma1, gamma0); }

Matrix EigFrame::reconstruct() const { return P * lambda.asDiagonal() * P.transpose(); }

double default_class_tol(const Matrix& A) { return 1e-8 * std::max(1.0, max_abs(A)); }

SvdFrame svd(const Matrix& X, double group_tol) {
  const int m = static_cast<int>(X.rows());
  const int n = static_cast<int>(X.cols());
  if (m > n) throw Error(ErrorKind::InvalidInput, "svd expects m <= n");
  if (!(group_tol > 0)) throw Error(ErrorKind::InvalidInput, "group_tol must be positive");
  if (!X.allFinite()) throw Error(ErrorKind::InvalidMatrix, "non-finite entry");

  SvdFrame f;
  f.group_tol = group_tol;
  if (m == 0) {
    f.U = Matrix(0, 0);
    f.V = Matrix::Identity(n, n);
    f.sigma = Vector(0);
    return f;
  }
  Eigen::JacobiSVD<Matrix> dec(X, Eigen::ComputeFullU | Eigen::ComputeFullV);
  f.U = dec.matrixU();
  f.V = dec.matrixV();
  f.sigma = dec.singularValues();

  // Columns paired with numerically zero singular values are re-derived from
  // the standard basis so that frames do not depend on solver internals.
  const double eps = std::numeric_limits<double>::epsilon();
  const double zero_thresh = 4.0 * n * eps * std::max(1.0, f.sigma(0));
  int r = 0;
  while (r < m && f.sigma(r) > zero_thresh) ++r;
  for (int i = 0; i < r; ++i) {
    double s = sign_of_dominant(f.U.col(i));
    f.U.col(i) *= s;
    f.V.col(i) *= s;
  }
  for (int i = r; i < m; ++i) f.sigma(i) = 0.0;
  complete_basis(f.U, r);
  complete_basis(f.V, r);
  f.groups = group_values(f.sigma, group_tol);
  return f;
}

SvdFrame svd(const Matrix& X) { return svd(X, default_class_tol(X)); }

IndexSets classify_singular_values(const Vector& sigma, double class_tol, int n) {
  const int m = static_cast<int>(sigma.size());
  if (n < 0) n = m;
  if (n < m) throw Error(ErrorKind::InvalidInput, "n must be at least the number of singular values");
  IndexSets s;
  s.class_tol = class_tol;
  s.m = m;
  s.n = n;
  for (int i = 0; i < m; ++i) {
    if (sigma(i) < -class_tol) throw Error(ErrorKind::InvalidInput, "negative singular value");
    if (i > 0 && sigma(i) > sigma(i - 1) + class_tol)
      throw Error(ErrorKind::InvalidInput, "singular values must be nonincreasing");
    const double v = sigma(i);
    if (v > 1.0 + class_tol)
      s.alpha.push_back(i);
    else if (std::abs(v - 1.0) <= class_tol)
      s.beta.push_back(i);
    else if (v > class_tol)
      s.gamma1.push_back(i);
    else
      s.gamma0.push_back(i);
  }
  s.c = range(m, n);
  return s;
}

int numerical_rank(const Vector& sigma, double class_tol) {
  int r = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > class_tol) ++r;
  return r;
}

SymSkew sym_skew(const Matrix& Y) {
  if (Y.rows() != Y.cols()) throw Error(ErrorKind::InvalidInput, "sym_skew expects a square matrix");
  return {sym(Y), skew(Y)};
}

Matrix sym(const Matrix& Y) { return 0.5 * (Y + Y.transpose()); }
Matrix skew(const Matrix& Y) { return 0.5 * (Y - Y.transpose()); }

bool is_symmetric(const Matrix& A, double rel_tol) {
  if (A.rows() != A.cols()) return false;
  return (A - A.transpose()).norm() <= rel_tol * std::max(1.0, A.norm());
}

PsdIndexSets classify_eigenvalues(const Vector& lambda, double class_tol) {
  PsdIndexSets s;
  s.class_tol = class_tol;
  for (int i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > class_tol)
      s.alpha.push_back(i);
    else if (lambda(i) < -class_tol)
      s.gamma.push_back(i);
    else
      s.beta.push_back(i);
  }
  return s;
}

EigResult eig_sym(const Matrix& A, double class_tol) {
  if (!A.allFinite()) throw Error(ErrorKind::InvalidMatrix, "non-finite entry");
  if (!is_symmetric(A)) throw Error(ErrorKind::InvalidMatrix, "matrix is not symmetric");
  const int n = static_cast<int>(A.rows());
  EigResult r;
  if (n == 0) {
    r.frame.P = Matrix(0, 0);
    r.frame.lambda = Vector(0);
    r.sets.class_tol = class_tol;
    return r;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(A));
  r.frame.P.resize(n, n);
  r.frame.lambda.resize(n);
  for (int i = 0; i < n; ++i) {
    const int j = n - 1 - i;
    r.frame.lambda(i) = es.eigenvalues()(j);
    Vector v = es.eigenvectors().col(j);
    r.frame.P.col(i) = sign_of_dominant(v) * v;
  }
  r.sets = classify_eigenvalues(r.frame.lambda, class_tol);
  return r;
}

Matrix block(const Matrix& A, const Index& rows, const Index& cols) {
  Matrix B(rows.size(), cols.size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j) B(i, j) = A(rows[i], cols[j]);
  return B;
}

void set_block(Matrix& A, const Index& rows, const Index& cols, const Matrix& B) {
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j) A(rows[i], cols[j]) = B(i, j);
}

Index range(int first, int last) {
  Index r;
  for (int i = first; i < last; ++i) r.push_back(i);
  return r;
}

Index concat(const Index& a, const Index& b) {
  Index r = a;
  r.insert(r.end(), b.begin(), b.end());
  return r;
}

Matrix read_matrix(std::istream& in) {
  long m = -1, n = -1;
  if (!(in >> m >> n) || m < 0 || n < 0) throw Error(ErrorKind::ParseError, "expected matrix header 'm n'");
  Matrix A(m, n);
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < n; ++j) {
      std::string tok;
      if (!(in >> tok)) throw Error(ErrorKind::ParseError, "matrix data ended early");
      try {
        size_t used = 0;
        A(i, j) = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(ErrorKind::ParseError, "bad matrix entry '" + tok + "'");
      }
    }
  if (!A.allFinite()) throw Error(ErrorKind::InvalidMatrix, "non-finite entry");
  return A;
}

void write_matrix(std::ostream& out, const Matrix& A) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << A.rows() << ' ' << A.cols() << '\n';
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (j) os << ' ';
      os << A(i, j);
    }
    os << '\n';
  }
  out << os.str();
}

Matrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
  return read_matrix(in);
}

void save_matrix(const std::string& path, const Matrix& A) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::ParseError, "cannot write " + path);
  write_matrix(out, A);
}

}  // namespace rankstat
