#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rankstat/solver.hpp"
#include "solver_harness.hpp"
#include "test_util.hpp"

#include <cmath>
#include <sstream>

using namespace rankstat;
using namespace testutil;

namespace {

Matrix diag2(double a, double b) {
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = a;
  D(1, 1) = b;
  return D;
}

int rank_at_class_tol(const Matrix& X) {
  Eigen::JacobiSVD<Matrix> s(X);
  return numerical_rank(s.singularValues(), default_class_tol(X));
}

// Global minimiser of 0.5 (x - 2)^2 + rho x - psi^*(rho x) over [0, 3].
double grid_oracle(const PsiSpec& psi, double rho) {
  double bx = 0.0, bv = kInf;
  for (int i = 0; i <= 300000; ++i) {
    const double x = 3.0 * i / 300000;
    const double v = 0.5 * (x - 2) * (x - 2) + rho * x - psi.conj(rho * x);
    if (v < bv) {
      bv = v;
      bx = x;
    }
  }
  return bx;
}

}  // namespace

TEST_CASE("prox with Omega") {
  std::mt19937_64 g(5);
  const Matrix Z = randn(g, 3, 3);
  const Matrix P = prox_nuclear_omega(Z, 0.3, {OmegaKind::PsdCone, 0});
  CHECK(in_omega({OmegaKind::PsdCone, 0}, P, 1e-12));
  const Matrix B = prox_nuclear_omega(Z, 0.3, {OmegaKind::FrobeniusBall, 0.5});
  CHECK(B.norm() <= 0.5 + 1e-12);
  // Optimality against random feasible perturbations.
  auto obj = [&](const Matrix& Y) { return 0.5 * (Y - Z).squaredNorm() + 0.3 * Y.jacobiSvd().singularValues().sum(); };
  for (int k = 0; k < 200; ++k) {
    Matrix Yp = P + 1e-3 * rand_sym(g, 3);
    Yp = prox_nuclear_omega(Yp, 0.0, {OmegaKind::PsdCone, 0});
    CHECK(obj(Yp) >= obj(P) - 1e-12);
    Matrix Yb = B + 1e-3 * randn(g, 3, 3);
    if (Yb.norm() > 0.5) Yb *= 0.5 / Yb.norm();
    CHECK(obj(Yb) >= obj(B) - 1e-12);
  }
}

TEST_CASE("least squares on Diag(2,0) against a 1-d grid search") {
  const PhiSpec phi = quadratic_phi(3);
  const PsiSpec psi(phi);
  const ProblemSpec prob = least_squares_problem(diag2(2, 0));
  for (double rho : {0.25, 0.5, 1.0}) {
    CAPTURE(rho);
    const SolveTrace t = solve_surrogate(prob, phi, rho);
    CHECK(t.converged);
    CHECK(std::abs(t.X(0, 0) - grid_oracle(psi, rho)) < 1e-4);
    CHECK(std::abs(t.X(1, 1)) < 1e-12);
    CHECK(std::abs(t.X(0, 1)) + std::abs(t.X(1, 0)) < 1e-12);
  }
  // rho on the linear branch: x1 = 2 exactly.
  CHECK(solve_surrogate(prob, phi, 1.0).X(0, 0) == doctest::Approx(2.0).epsilon(1e-8));
  // Large rho: zero start is itself a DC fixed point; the grid minimiser is 2.
  const SolveTrace z = solve_surrogate(prob, phi, 3.0);
  CHECK(z.X.norm() == 0.0);
  CHECK(grid_oracle(psi, 3.0) == doctest::Approx(2.0));
  CHECK(certify_DC(prob, z.X, phi, 3.0).status == Verdict::Verified);
  SolveOptions warm;
  warm.X0 = diag2(2, 0);
  CHECK(solve_surrogate(prob, phi, 3.0, warm).X(0, 0) == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("zero objective keeps the zero start") {
  const PhiSpec phi = quadratic_phi(3);
  ProblemSpec prob = least_squares_problem(Matrix::Zero(2, 3));
  prob.f = [](const Matrix&) { return 0.0; };
  prob.grad = [](const Matrix& X) { return Matrix(Matrix::Zero(X.rows(), X.cols())); };
  const SolveTrace t = solve_surrogate(prob, phi, 1.0);
  CHECK(t.converged);
  CHECK(t.X.norm() == 0.0);
}

TEST_CASE("descent and fixed-point certification on recovery instances") {
  const DescentStats st = descent_harness(2000, 50, 1.0, 1e-6);
  CHECK(st.max_increase <= 1e-12);
  CHECK(st.max_dc_residual <= 1e-6);
  CHECK(st.dc_verified == 50);
  CHECK(st.ep_verified == 50);
  CHECK(st.converged == 50);
}

TEST_CASE("fixed points under constraints") {
  std::mt19937_64 g(17);
  const PhiSpec phi = quadratic_phi(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix S = rand_sym(g, 3);
    const ProblemSpec psd = least_squares_problem(S, 1.0, {OmegaKind::PsdCone, 0});
    const ProblemSpec ball = least_squares_problem(randn(g, 2, 3), 1.0, {OmegaKind::FrobeniusBall, 0.8});
    for (const ProblemSpec* p : {&psd, &ball}) {
      const SolveTrace t = solve_surrogate(*p, phi, 0.7);
      CHECK(t.converged);
      CHECK(in_omega(p->omega, t.X, 1e-10));
      for (size_t k = 1; k < t.rows.size(); ++k) CHECK(t.rows[k].objective <= t.rows[k - 1].objective + 1e-12);
      CertOptions co;
      co.tol = 1e-6;
      CHECK(certify_DC(*p, t.X, phi, 0.7, co).status == Verdict::Verified);
    }
  }
}

TEST_CASE("planted rank-one recovery with rho tuned on separate seeds") {
  const PhiSpec phi = quadratic_phi(3);
  std::vector<std::uint64_t> tuning;
  for (std::uint64_t s = 1000; s < 1020; ++s) tuning.push_back(s);
  const double rho = tune_recovery_rho(tuning, phi, {0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 3.0});
  MESSAGE("tuned rho " << rho);
  int hits = 0;
  for (std::uint64_t s = 5000; s < 5050; ++s) hits += run_recovery(s, phi, rho).rank == 1;
  MESSAGE("rank-one recoveries " << hits << "/50");
  CHECK(hits >= 40);
}

TEST_CASE("penalty path") {
  const PhiSpec phi = quadratic_phi(3);
  const RecoveryInstance inst = planted_rank_one(7);
  std::ostringstream a, b;
  write_trace(a, penalty_path(inst.prob, phi, {0.5}).front());
  write_trace(b, solve_surrogate(inst.prob, phi, 0.5));
  CHECK(a.str() == b.str());

  CHECK_THROWS_AS(penalty_path(inst.prob, phi, {}), Error);
  try {
    penalty_path(inst.prob, phi, {});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptySchedule);
  }
  CHECK_THROWS_AS(penalty_path(inst.prob, phi, {10, 1}), Error);

  int mono = 0;
  for (std::uint64_t s = 3000; s < 3050; ++s) {
    const auto path = penalty_path(planted_rank_one(s).prob, phi, {1, 10, 100});
    REQUIRE(path.size() == 3);
    bool ok = true;
    for (size_t i = 1; i < path.size(); ++i) ok = ok && rank_at_class_tol(path[i].X) <= rank_at_class_tol(path[i - 1].X);
    for (const auto& t : path)
      for (size_t k = 1; k < t.rows.size(); ++k) CHECK(t.rows[k].objective <= t.rows[k - 1].objective + 1e-12);
    mono += ok;
  }
  CHECK(mono >= 45);
}

TEST_CASE("determinism and config echo") {
  const PhiSpec phi = quadratic_phi(3);
  const RecoveryInstance inst = planted_rank_one(11);
  std::ostringstream a, b;
  write_trace(a, solve_surrogate(inst.prob, phi, 1.0));
  write_trace(b, solve_surrogate(inst.prob, phi, 1.0));
  CHECK(a.str() == b.str());
  CHECK(a.str().find("# rho 1 phi quad") == 0);
}

TEST_CASE("errors") {
  const RecoveryInstance inst = planted_rank_one(11);
  CHECK_THROWS_AS(solve_surrogate(inst.prob, quadratic_phi(3), 0.0), Error);
  // linear phi: the conjugate has kinks, so the condition fails.
  CHECK_THROWS_AS(solve_surrogate(inst.prob, linear_phi(), 1.0), Error);

  ProblemSpec broken = least_squares_problem(diag2(2, 0));
  broken.f = [](const Matrix& X) { return X.norm() > 0.5 ? std::nan("") : 0.5 * X.squaredNorm(); };
  bool thrown = false;
  try {
    solve_surrogate(broken, quadratic_phi(3), 0.1);
  } catch (const InnerSolveFailure& e) {
    thrown = true;
    CHECK(e.kind() == ErrorKind::InnerSolveFailure);
    CHECK(e.trace().rows.size() >= 1);
  }
  CHECK(thrown);
}
