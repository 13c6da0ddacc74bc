#pragma once

#include "rankstat/common.hpp"
#include "rankstat/graph_cone.hpp"
#include "rankstat/penalty.hpp"
#include "rankstat/spectral.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rankstat {

enum class OmegaKind { WholeSpace, PsdCone, FrobeniusBall };

struct Omega {
  OmegaKind kind = OmegaKind::WholeSpace;
  double radius = 0.0;  // FrobeniusBall only
};

std::string to_string(OmegaKind k);

// f(X) = 0.5 ||A vec(X) - b||^2, vec column-major.
struct QuadraticData {
  Matrix A;
  Vector b;
};

// nu f + rank + indicator of Omega, with f smooth. m <= n.
struct ProblemSpec {
  int m = 0, n = 0;
  double nu = 1.0;
  std::function<double(const Matrix&)> f;
  std::function<Matrix(const Matrix&)> grad;
  Omega omega;
  std::optional<QuadraticData> quad;
  // Lipschitz constant of grad f when known (quadratic: ||A||^2), else 0.
  double lipschitz = 0.0;

  Matrix scaled_grad(const Matrix& X) const { return nu * grad(X); }
  // Shapes, nu > 0, Omega data, and a central-difference gradient check at
  // five random points (relative error <= 1e-5). Throws InvalidInput.
  void validate(std::uint64_t seed = 42) const;
};

ProblemSpec quadratic_problem(int m, int n, Matrix A, Vector b, double nu = 1.0, Omega omega = {});
// f(X) = 0.5 ||X - M||_F^2.
ProblemSpec least_squares_problem(const Matrix& M, double nu = 1.0, Omega omega = {});
// f(X) = 0.5 sum over observed (i,j) of (X_ij - M_ij)^2.
ProblemSpec sampling_problem(const Matrix& M, const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& mask,
                             double nu = 1.0);

// "problem m n nu", "omega whole|psd|ball <r>", then sections "A" and "b" in
// the matrix format (b as a p x 1 matrix).
ProblemSpec read_problem(std::istream& in);
ProblemSpec load_problem(const std::string& path);
void write_problem(std::ostream& out, const ProblemSpec& p);

// Omega membership: PSD uses symmetry and lambda_min >= -tol max(1, ||X||);
// the ball uses ||X||_F <= r (1 + tol).
bool in_omega(const Omega& omega, const Matrix& X, double tol);

enum class CertKind { R, M, EP, DC };
std::string to_string(CertKind k);
CertKind cert_kind_from_string(const std::string& s);

struct CertReport {
  CertKind kind = CertKind::R;
  Verdict status = Verdict::Unknown;
  double tol = 0.0;
  std::optional<double> rho;
  std::optional<Matrix> Wbar, DeltaW, DeltaGamma;
  // Defining residuals, relative. Verified means each is <= tol.
  std::vector<ResidualEntry> residuals;
  // Structural consequences checked on top (zero-block patterns, rank counts).
  std::vector<ResidualEntry> checks;
  std::string note;

  double residual(const std::string& name) const;
  double check(const std::string& name) const;
};

void write_report(std::ostream& out, const CertReport& r);

struct CertOptions {
  double tol = 1e-8;
  int budget = 2000;
  std::uint64_t seed = 42;
  double class_tol = -1.0;  // < 0: default from Xbar
};

// 16 log-spaced points in [1e-2, 1e4].
std::vector<double> default_rho_grid();
// "a,b,c" or "log:lo:hi:count".
std::vector<double> parse_rho_grid(const std::string& s);

CertReport certify_R(const ProblemSpec& prob, const Matrix& Xbar, const CertOptions& opt = {});

// User W, when given, is tried before the constructed ones.
CertReport certify_M(const ProblemSpec& prob, const Matrix& Xbar, const PhiSpec& phi, const CertOptions& opt = {},
                     const std::optional<Matrix>& user_W = std::nullopt);

struct MStructure {
  bool holds = false;
  double alpha_residual = 0.0;  // alpha rows and columns of U' DG V
  double beta_sym_residual = 0.0;
};

MStructure m_structure(const Matrix& Xbar, const Matrix& Wbar, const Matrix& DeltaGamma, double tol,
                       double class_tol = -1.0);
bool verify_M_structure(const Matrix& Xbar, const Matrix& Wbar, const Matrix& DeltaGamma, double tol);

CertReport certify_EP(const ProblemSpec& prob, const Matrix& Xbar, const PhiSpec& phi,
                      const std::vector<double>& rho_grid, const CertOptions& opt = {});

CertReport certify_DC(const ProblemSpec& prob, const Matrix& Xbar, const PhiSpec& phi, double rho,
                      const CertOptions& opt = {});
// Smallest passing rho on the grid; Refuted only if refuted at every point.
CertReport certify_DC_grid(const ProblemSpec& prob, const Matrix& Xbar, const PhiSpec& phi,
                           const std::vector<double>& rho_grid, const CertOptions& opt = {});

// W with singular values (psi^*)'(rho sigma_i(X)) on the frame of X, entries
// within 1e-12 of 0 or 1 snapped.
Matrix ep_wbar(const SvdFrame& frameX, double rho, const PsiSpec& psi);

// Distance from 0 to nu grad f + N_Omega(X) + rho (subdiff ||X||_* - W),
// minimised over the normal cone; returns the absolute distance and the
// normal-cone element used.
struct BalanceResult {
  double distance = 0.0;
  Matrix N;
  bool decided = true;  // false when the PSD inner iteration ran out of budget
};

BalanceResult subgradient_balance(const ProblemSpec& prob, const Matrix& Xbar, const Matrix& Wbar, double rho,
                                  const CertOptions& opt);

enum class Implication { MtoR, RtoM, DCtoEP, EPtoDC, EPtoR };
std::string to_string(Implication i);

struct ImplicationStatus {
  Implication which;
  bool applicable = false;  // premise Verified and hypothesis on phi / theta1 met
  bool violated = false;    // applicable and conclusion Refuted
  bool inconclusive = false;  // applicable and conclusion Unknown
};

struct RelationChart {
  CertReport R, M, EP, DC;
  std::vector<ImplicationStatus> implications;
  bool any_violation() const;
};

RelationChart relation_chart(const ProblemSpec& prob, const Matrix& Xbar, const PhiSpec& phi,
                             const std::vector<double>& rho_grid, const CertOptions& opt = {});

void write_chart(std::ostream& out, const RelationChart& c);

}  // namespace rankstat
