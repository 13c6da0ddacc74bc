#pragma once

#include "rankstat/common.hpp"
#include "rankstat/spectral.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rankstat {

struct OmegaMatrices {
  Matrix Omega1;  // m x m
  Matrix Omega2;  // m x m
  Matrix Omega3;  // m x (n - m)
};

// Entrywise divided differences of min(1, .) built from sigma(Zbar). Two
// singular values closer than tie_tol count as equal.
OmegaMatrices build_omega(const Vector& sigmaZ, int n, double tie_tol = 0.0);

struct ThetaSigma {
  Matrix Theta1, Theta2, Sigma1, Sigma2;  // m x m, indexed like sigma
};

ThetaSigma build_theta_sigma(const OmegaMatrices& om, const IndexSets& sets);

// First divided difference matrix of min(1, .) at z (z nonincreasing, positive).
Matrix divided_difference_min1(const Vector& z, double tie_tol = 0.0);

struct BetaPartition {
  Index plus, zero, minus;  // positions inside beta, 0-based
};

struct PartitionXi {
  BetaPartition part;
  Matrix Xi1_pm;  // |plus| x |minus|, entries in [0,1]
  Matrix Xi1;
  Matrix Xi2;
};

PartitionXi enumerate_xi(int beta_size, const BetaPartition& part, const Matrix& Xi1_pm);

// All 3^k assignments of k positions to (plus, zero, minus).
std::vector<BetaPartition> all_partitions(int k);

// Frame of Zbar = X + W shared by every block formula.
struct GraphFrame {
  SvdFrame frame;
  IndexSets sets;
  Vector sigma_snapped;  // beta set to exactly 1, gamma0 to exactly 0
};

GraphFrame graph_frame(const Matrix& X, const Matrix& W, double class_tol = -1.0);

struct ResidualEntry {
  std::string block;
  double value;
};

struct ConeWitness {
  Matrix Q;
  PartitionXi xi;
};

struct ConeMembershipCertificate {
  Verdict verdict = Verdict::Unknown;
  double threshold = 0.0;
  std::vector<ResidualEntry> residuals;
  std::optional<ConeWitness> witness;
  std::string note;

  double residual(const std::string& block) const;
};

struct SearchOptions {
  double tol = 1e-8;
  int budget = 2000;
  std::uint64_t seed = 42;
  double class_tol = -1.0;  // < 0: default from Zbar
};

// Residual of the beta-block condition for fixed Q and partition, with the
// free Xi entries fitted by box-constrained least squares.
struct BetaFit {
  double equation_residual = 0.0;
  double sign_violation = 0.0;
  PartitionXi xi;
};

BetaFit fit_beta_block(const Matrix& M, const Matrix& N, const Matrix& Q, const BetaPartition& part);

// Searches Q and the partition for the beta-block condition. Returns the best
// fit; `exhaustive` tells whether a failure is conclusive.
struct BetaSearchResult {
  bool found = false;
  bool exhaustive = false;
  double best_cost = 0.0;
  Matrix Q;
  BetaFit fit;
};

BetaSearchResult search_beta_block(const Matrix& M, const Matrix& N, double threshold, const SearchOptions& opt);

ConeMembershipCertificate normal_cone_membership(const Matrix& X, const Matrix& W, const Matrix& G, const Matrix& H,
                                                 const SearchOptions& opt = {});

// u in D^* subdiff||.||_*(X|W)(v)  iff  (u, -v) in the normal cone.
ConeMembershipCertificate coderivative_contains(const Matrix& X, const Matrix& W, const Matrix& v, const Matrix& u,
                                                const SearchOptions& opt = {});

void write_certificate(std::ostream& out, const ConeMembershipCertificate& c);

}  // namespace rankstat
