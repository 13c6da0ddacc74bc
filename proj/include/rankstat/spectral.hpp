#pragma once

#include "rankstat/common.hpp"

#include <iosfwd>
#include <utility>
#include <vector>

namespace rankstat {

using Index = std::vector<int>;

// X = U [Diag(sigma) 0] V^T with m <= n.
struct SvdFrame {
  Matrix U;
  Matrix V;
  Vector sigma;
  double group_tol = 0.0;
  // Half-open ranges [first, last) of singular values equal up to group_tol.
  std::vector<std::pair<int, int>> groups;

  Matrix reconstruct() const;
};

struct IndexSets {
  Index alpha, beta, gamma1, gamma0, c;
  double class_tol = 0.0;
  int m = 0, n = 0;

  // gamma1 followed by gamma0, in increasing index order.
  Index gamma() const;
};

struct EigFrame {
  Matrix P;
  Vector lambda;  // nonincreasing

  Matrix reconstruct() const;
};

struct PsdIndexSets {
  Index alpha, beta, gamma;
  double class_tol = 0.0;
};

struct SymSkew {
  Matrix S;
  Matrix K;
};

struct EigResult {
  EigFrame frame;
  PsdIndexSets sets;
};

// 1e-8 * max(1, ||A||_inf) where ||.||_inf is the largest absolute entry.
double default_class_tol(const Matrix& A);

SvdFrame svd(const Matrix& X, double group_tol);
SvdFrame svd(const Matrix& X);

IndexSets classify_singular_values(const Vector& sigma, double class_tol, int n = -1);

// Number of singular values above class_tol.
int numerical_rank(const Vector& sigma, double class_tol);

SymSkew sym_skew(const Matrix& Y);
Matrix sym(const Matrix& Y);
Matrix skew(const Matrix& Y);

bool is_symmetric(const Matrix& A, double rel_tol = 1e-12);

EigResult eig_sym(const Matrix& A, double class_tol);
PsdIndexSets classify_eigenvalues(const Vector& lambda, double class_tol);

// Block extraction / assignment over index lists.
Matrix block(const Matrix& A, const Index& rows, const Index& cols);
void set_block(Matrix& A, const Index& rows, const Index& cols, const Matrix& B);
Index range(int first, int last);
Index concat(const Index& a, const Index& b);

Matrix read_matrix(std::istream& in);
void write_matrix(std::ostream& out, const Matrix& A);
Matrix load_matrix(const std::string& path);
void save_matrix(const std::string& path, const Matrix& A);

}  // namespace rankstat
