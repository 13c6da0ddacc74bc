#pragma once

#include "rankstat/common.hpp"
#include "rankstat/graph_cone.hpp"
#include "rankstat/spectral.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace rankstat {

Matrix project_psd(const Matrix& A);

// true iff ||X - Pi(X+Y)||_F <= tol * max(1, ||X||_F + ||Y||_F).
bool graph_membership_psd(const Matrix& X, const Matrix& Y, double tol = 1e-9);

struct PsdGraphPoint {
  Matrix X, Y;
  EigFrame frame;  // of A = X + Y
  PsdIndexSets sets;
};

// Throws NotOnGraph when (X, Y) is not on the graph of the normal cone map.
PsdGraphPoint psd_graph_point(const Matrix& X, const Matrix& Y, double class_tol = -1.0);

// Divided differences of max(0, .) over the eigenvalues of A = X + Y. Entries
// on ties use the one-sided value (1 for positive, 0 otherwise). The beta-beta
// block is left at zero.
Matrix psd_sigma(const Vector& lambda, const PsdIndexSets& sets);

// (Sigma)_{ij} = lambda_i / (lambda_i - lambda_j), i in alpha, j in gamma.
Matrix sigma_alpha_gamma(const PsdGraphPoint& p);

// Directional derivative Pi'(A; D).
Matrix project_psd_derivative(const Matrix& A, const Matrix& D, double class_tol = -1.0);

enum class TangentPolicy {
  Full,        // block patterns, alpha-gamma coupling, beta-beta projection
  PatternOnly  // block patterns and beta-beta projection only
};

struct TangentReport {
  bool tangent = false;
  double threshold = 0.0;
  std::vector<ResidualEntry> residuals;

  double residual(const std::string& block) const;
};

TangentReport tangent_gph_psd_report(const PsdGraphPoint& p, const Matrix& G, const Matrix& H, double tol = 1e-8,
                                     TangentPolicy policy = TangentPolicy::Full);
bool tangent_gph_psd(const PsdGraphPoint& p, const Matrix& G, const Matrix& H, double tol = 1e-8);

struct DirectionalData {
  Matrix G, H;
  Matrix B;        // P_beta' (G + H) P_beta
  Matrix UB;       // eigenvectors of B, eigenvalues nonincreasing
  Vector lambdaB;
  Index pi, delta, nu;  // positions in 0..|beta|-1, in this order
  Matrix Gamma_pinu;    // |pi| x |nu|
};

DirectionalData directional_data(const PsdGraphPoint& p, const Matrix& G, const Matrix& H, double class_tol = -1.0);

// Xi^_1 / Xi^_2 on the delta-delta block for a partition of delta and the free
// delta+ x delta- entries of Xi^_1.
PartitionXi psd_xi_hat(int delta_size, const BetaPartition& part, const Matrix& xi_pm);

ConeMembershipCertificate directional_normal_membership_psd(const PsdGraphPoint& p, const Matrix& G, const Matrix& H,
                                                            const Matrix& Xs, const Matrix& Ys,
                                                            const SearchOptions& opt = {},
                                                            TangentPolicy policy = TangentPolicy::Full);

// (Xs, Ys) in the regular normal cone to the graph at (Xp, Yp).
bool regular_normal_gph_psd(const Matrix& Xp, const Matrix& Yp, const Matrix& Xs, const Matrix& Ys,
                            double tol = 1e-8);

// Program data: f(x,y) = Fx x + Fy y + C and g(x,y) = Gx x + Gy y + D,
// operators stored as n^2 x dim matrices acting on column-major vec.
struct MpsccProblem {
  int n = 0, px = 0, py = 0;
  Matrix Fx, Fy, Gx, Gy;
  Matrix C, D;

  Matrix f(const Vector& x, const Vector& y) const;
  Matrix g(const Vector& x, const Vector& y) const;
  void validate() const;
};

// The 3x3 example: f = A(x) + Diag(1,0,0), g = A(y) + Diag(0,0,-1) with
// A(x) = [x1 x3 x2; x3 x2 x1; x2 x1 x3].
MpsccProblem example_mpscc();
Matrix example_map(const Vector& x);

MpsccProblem read_mpscc(std::istream& in);
MpsccProblem load_mpscc(const std::string& path);
void write_mpscc(std::ostream& out, const MpsccProblem& p);

enum class ImplicationVerdict { HoldsOnBranches, CounterexampleFound, Unknown };
std::string to_string(ImplicationVerdict v);

struct ImplicationOptions {
  double tol = 1e-10;
  int budget = 2000;
  std::uint64_t seed = 42;
  double class_tol = -1.0;
  TangentPolicy policy = TangentPolicy::Full;
  bool stationarity_equations = true;  // d + grad f Lambda + grad g Delta = 0
};

struct BranchResult {
  std::string label;
  int nullspace_dim = 0;
  bool sign_feasible = false;  // some nonzero null vector meets the delta0 sign conditions
  bool decided = true;
};

struct ImplicationResult {
  ImplicationVerdict verdict = ImplicationVerdict::Unknown;
  TangentReport tangent;
  DirectionalData direction;
  std::vector<BranchResult> branches;
  Vector d1, d2;
  Matrix Lambda, Delta;  // witness when a counterexample is found
  // Null space of the counterexample branch as (Lambda, Delta) pairs.
  std::vector<std::pair<Matrix, Matrix>> null_basis;
  std::string note;
};

ImplicationResult implication_check(const MpsccProblem& prob, const Vector& xbar, const Vector& ybar, const Vector& w,
                                    const ImplicationOptions& opt = {});

void write_implication(std::ostream& out, const ImplicationResult& r);

}  // namespace rankstat
