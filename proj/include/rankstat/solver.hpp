#pragma once

#include "rankstat/common.hpp"
#include "rankstat/penalty.hpp"
#include "rankstat/stationarity.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rankstat {

struct SolveOptions {
  int max_iter = 5000;
  double tol = 1e-9;
  std::uint64_t seed = 42;
  std::optional<Matrix> X0;  // zero when absent
  int inner_max_iter = 200;
  double armijo = 1e-4;
  double shrink = 0.5;
  // Momentum on the base point of each majorant (accepted only on descent).
  bool extrapolate = true;
};

struct TraceRow {
  int k = 0;
  double objective = 0.0;
  double residual = 0.0;  // DC balance residual, relative
  int rank = 0;
};

struct SolveTrace {
  std::vector<TraceRow> rows;
  Matrix X;
  bool converged = false;
  int inner_steps = 0;
  // Config echo.
  double rho = 0.0;
  std::string phi;
  std::vector<double> phi_params;
  double step0 = 0.0;
  double tol = 0.0;
  int max_iter = 0;
  std::uint64_t seed = 0;
};

class InnerSolveFailure : public Error {
 public:
  InnerSolveFailure(const std::string& what, SolveTrace trace)
      : Error(ErrorKind::InnerSolveFailure, what), trace_(std::move(trace)) {}
  const SolveTrace& trace() const { return trace_; }

 private:
  SolveTrace trace_;
};

// nu f(X) + rho ||X||_* - sum_i psi^*(rho sigma_i(X)); +inf outside Omega.
double surrogate_objective(const ProblemSpec& prob, const PsiSpec& psi, double rho, const Matrix& X);

// argmin_Y 0.5 ||Y - Z||^2 + tau ||Y||_* over Omega.
Matrix prox_nuclear_omega(const Matrix& Z, double tau, const Omega& omega);

// DCA on the surrogate: W_k = grad of the conjugate term at rho X_k, then
// proximal-gradient steps on the convex majorant
//   nu f(X) + rho ||X||_* - rho <W_k, X> + indicator(Omega).
SolveTrace solve_surrogate(const ProblemSpec& prob, const PhiSpec& phi, double rho, const SolveOptions& opt = {});

// Warm-started solves over an increasing rho schedule.
std::vector<SolveTrace> penalty_path(const ProblemSpec& prob, const PhiSpec& phi, const std::vector<double>& schedule,
                                     const SolveOptions& opt = {});

void write_trace(std::ostream& out, const SolveTrace& t);

// Planted rank-one recovery: M = s u v' (n x n, s = n), a uniformly random set
// of round(frac n^2) observed entries, f = 0.5 ||P(X - M)||^2.
struct RecoveryInstance {
  ProblemSpec prob;
  Matrix truth;
};

RecoveryInstance planted_rank_one(std::uint64_t seed, int n = 5, double frac = 0.6);

struct RecoveryOutcome {
  int rank = 0;
  double rel_error = 0.0;  // ||X - M||_F / ||M||_F
  SolveTrace trace;
};

RecoveryOutcome run_recovery(std::uint64_t seed, const PhiSpec& phi, double rho, const SolveOptions& opt = {});

// rho from `grid` with the most rank-one recoveries over the tuning seeds,
// ties broken by mean relative error.
double tune_recovery_rho(const std::vector<std::uint64_t>& seeds, const PhiSpec& phi, const std::vector<double>& grid,
                         const SolveOptions& opt = {});

}  // namespace rankstat
