#pragma once

#include "rankstat/common.hpp"
#include "rankstat/spectral.hpp"

namespace rankstat {

struct NuclearMembership {
  bool member = false;
  double gap = 0.0;              // ||X||_* - <W, X>
  double specnorm_excess = 0.0;  // max(0, ||W|| - 1)
};

NuclearMembership nuclear_membership(const Matrix& X, const Matrix& W, double tol);

// U_1 V_1^T + t U_2 [I 0] V_2^T, with the split at rank(X) at class_tol.
Matrix nuclear_representative(const Matrix& X, double t = 0.0, double class_tol = -1.0);
Matrix nuclear_representative(const SvdFrame& frameX, int rank, double t = 0.0);

// argmin_Y 0.5 ||Y - Z||_F^2 + tau ||Y||_*.
Matrix prox_nuclear(const Matrix& Z, double tau);

struct RankSubdiffMembership {
  bool member = false;
  double left_residual = 0.0;   // ||U_1^T M||_F
  double right_residual = 0.0;  // ||M V_1||_F
  int rank = 0;
};

// Limiting subdifferential of rank at Xbar: matrices whose column and row
// spaces are orthogonal to those of Xbar.
RankSubdiffMembership rank_subdiff_membership(const Matrix& Xbar, const Matrix& M, double tol,
                                              double class_tol = -1.0);

// Orthogonal projection onto that subspace: (I - U_1 U_1^T) M (I - V_1 V_1^T).
Matrix project_rank_subdiff(const Matrix& Xbar, const Matrix& M, double class_tol = -1.0);

}  // namespace rankstat
