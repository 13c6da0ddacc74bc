#include "rankstat/solver.hpp"

#include "rankstat/nuclear.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace rankstat {

namespace {

Matrix spectral_apply(const Matrix& Z, const std::function<Vector(const Vector&)>& fn) {
  if (Z.rows() > Z.cols()) return spectral_apply(Z.transpose(), fn).transpose();
  Eigen::JacobiSVD<Matrix> s(Z, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector v = fn(s.singularValues());
  Matrix D = Matrix::Zero(Z.rows(), Z.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) D(i, i) = v(i);
  return s.matrixU() * D * s.matrixV().transpose();
}

int rank_of(const Matrix& X) {
  if (X.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> s(X);
  return numerical_rank(s.singularValues(), default_class_tol(X));
}

double dc_residual(const ProblemSpec& prob, const PsiSpec& psi, double rho, const Matrix& X) {
  CertOptions co;
  co.tol = 1e-12;
  const Matrix W = ep_wbar(svd(X), rho, psi);
  const BalanceResult b = subgradient_balance(prob, X, W, rho, co);
  return b.distance / std::max(1.0, prob.scaled_grad(X).norm());
}

}  // namespace

double surrogate_objective(const ProblemSpec& prob, const PsiSpec& psi, double rho, const Matrix& X) {
  if (!in_omega(prob.omega, X, 1e-10)) return kInf;
  Eigen::JacobiSVD<Matrix> s(X);
  const Vector sig = s.singularValues();
  return prob.nu * prob.f(X) + rho * sig.sum() - psi_star_spectral_sum(sig, rho, psi);
}

Matrix prox_nuclear_omega(const Matrix& Z, double tau, const Omega& omega) {
  switch (omega.kind) {
    case OmegaKind::WholeSpace: return prox_nuclear(Z, tau);
    case OmegaKind::PsdCone: {
      // On the PSD cone ||X||_* = tr X.
      Eigen::SelfAdjointEigenSolver<Matrix> es(sym(Z));
      const Vector l = (es.eigenvalues().array() - tau).max(0.0).matrix();
      return es.eigenvectors() * l.asDiagonal() * es.eigenvectors().transpose();
    }
    case OmegaKind::FrobeniusBall: {
      const double r = omega.radius;
      return spectral_apply(Z, [tau, r](const Vector& s) {
        Vector v = (s.array() - tau).max(0.0).matrix();
        const double nv = v.norm();
        if (nv > r) v *= r / nv;
        return v;
      });
    }
  }
  return Z;
}

SolveTrace solve_surrogate(const ProblemSpec& prob, const PhiSpec& phi, double rho, const SolveOptions& opt) {
  if (!(rho > 0)) throw Error(ErrorKind::InvalidInput, "rho must be positive");
  if (!(opt.tol > 0)) throw Error(ErrorKind::InvalidInput, "tol must be positive");
  if (!phi.cond_phi) throw Error(ErrorKind::UnsupportedPhi, "solver needs the conjugate condition on phi");
  const PsiSpec psi(phi);

  SolveTrace tr;
  tr.rho = rho;
  tr.phi = phi.name;
  tr.phi_params = phi.params;
  tr.tol = opt.tol;
  tr.max_iter = opt.max_iter;
  tr.seed = opt.seed;
  const double L = prob.nu * prob.lipschitz;
  double t = L > 0 ? 1.0 / L : 1.0;
  tr.step0 = t;

  Matrix X = opt.X0 ? *opt.X0 : Matrix::Zero(prob.m, prob.n);
  if (X.rows() != prob.m || X.cols() != prob.n) throw Error(ErrorKind::InvalidInput, "X0 has the wrong shape");
  if (!in_omega(prob.omega, X, 1e-10)) X = prox_nuclear_omega(X, 1e-300, prob.omega);

  double obj = surrogate_objective(prob, psi, rho, X);
  tr.rows.push_back({0, obj, dc_residual(prob, psi, rho, X), rank_of(X)});

  Matrix Xprev = X;
  for (int k = 1; k <= opt.max_iter; ++k) {
    // Extrapolated base point, kept only when it does not raise the objective;
    // the majorant is then built at the base, so descent is preserved.
    Matrix B = X;
    if (opt.extrapolate && k > 1) {
      Matrix Zx = X + (k - 2.0) / (k + 1.0) * (X - Xprev);
      if (prob.omega.kind != OmegaKind::WholeSpace) Zx = prox_nuclear_omega(Zx, 0.0, prob.omega);
      if (surrogate_objective(prob, psi, rho, Zx) <= obj) B = Zx;
    }
    const Matrix W = ep_wbar(svd(B), rho, psi);
    // Majorant without its constant term.
    auto major = [&](const Matrix& Y) { return prob.nu * prob.f(Y) + rho * (nuclear_norm(Y) - W.cwiseProduct(Y).sum()); };
    Matrix Y = B;
    double my = major(Y);
    for (int j = 0; j < opt.inner_max_iter; ++j) {
      const Matrix g = prob.scaled_grad(Y) - rho * W;
      const double floor_step = 0.1 * opt.tol * std::max(1.0, Y.norm());
      // Rounding in the majorant is relative to its largest term.
      const double slack = 16 * std::numeric_limits<double>::epsilon() *
                           (1.0 + prob.nu * prob.f(Y) + rho * (nuclear_norm(Y) + std::abs(W.cwiseProduct(Y).sum())));
      Matrix Yn;
      double mn;
      bool stalled = false;
      for (;;) {
        Yn = prox_nuclear_omega(Y - t * g, t * rho, prob.omega);
        mn = major(Yn);
        if (!std::isfinite(mn) || !Yn.allFinite()) throw InnerSolveFailure("non-finite inner iterate", tr);
        if (mn <= my - opt.armijo / t * (Yn - Y).squaredNorm() + slack) break;
        if ((Yn - Y).norm() <= floor_step) {
          stalled = true;
          break;
        }
        t *= opt.shrink;
        if (t < 1e-20) throw InnerSolveFailure("inner step size underflow", tr);
      }
      if (stalled) break;
      ++tr.inner_steps;
      const double step = (Yn - Y).norm();
      Y = std::move(Yn);
      my = mn;
      if (step <= floor_step) break;
    }
    const double dx = (Y - X).norm();
    const double scale = std::max(1.0, X.norm());
    Xprev = X;
    X = std::move(Y);
    obj = surrogate_objective(prob, psi, rho, X);
    const double res = dc_residual(prob, psi, rho, X);
    tr.rows.push_back({k, obj, res, rank_of(X)});
    if (dx <= opt.tol * scale && res <= 10 * opt.tol) {
      tr.converged = true;
      break;
    }
  }
  tr.X = X;
  return tr;
}

std::vector<SolveTrace> penalty_path(const ProblemSpec& prob, const PhiSpec& phi, const std::vector<double>& schedule,
                                     const SolveOptions& opt) {
  if (schedule.empty()) throw Error(ErrorKind::EmptySchedule, "rho schedule is empty");
  for (size_t i = 1; i < schedule.size(); ++i)
    if (!(schedule[i] > schedule[i - 1])) throw Error(ErrorKind::InvalidInput, "rho schedule must increase");
  std::vector<SolveTrace> out;
  SolveOptions o = opt;
  for (double rho : schedule) {
    out.push_back(solve_surrogate(prob, phi, rho, o));
    o.X0 = out.back().X;
  }
  return out;
}

void write_trace(std::ostream& out, const SolveTrace& t) {
  out << std::setprecision(17);
  out << "# rho " << t.rho << " phi " << t.phi;
  for (double p : t.phi_params) out << ' ' << p;
  out << " step0 " << t.step0 << " tol " << t.tol << " max_iter " << t.max_iter << " seed " << t.seed << '\n';
  out << "k obj residual rank\n";
  for (const auto& r : t.rows) out << r.k << ' ' << r.objective << ' ' << r.residual << ' ' << r.rank << '\n';
  out << "# converged " << (t.converged ? 1 : 0) << " inner_steps " << t.inner_steps << '\n';
  out << "X\n";
  write_matrix(out, t.X);
}

RecoveryInstance planted_rank_one(std::uint64_t seed, int n, double frac) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector u(n), v(n);
  for (int i = 0; i < n; ++i) u(i) = nd(g);
  for (int i = 0; i < n; ++i) v(i) = nd(g);
  const Matrix M = n * (u / u.norm()) * (v / v.norm()).transpose();
  std::vector<int> idx(n * n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), g);
  const int k = static_cast<int>(std::lround(frac * n * n));
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, false);
  for (int i = 0; i < k; ++i) mask(idx[i] % n, idx[i] / n) = true;
  return {sampling_problem(M, mask), M};
}

RecoveryOutcome run_recovery(std::uint64_t seed, const PhiSpec& phi, double rho, const SolveOptions& opt) {
  RecoveryInstance inst = planted_rank_one(seed);
  RecoveryOutcome o;
  o.trace = solve_surrogate(inst.prob, phi, rho, opt);
  o.rank = rank_of(o.trace.X);
  o.rel_error = (o.trace.X - inst.truth).norm() / inst.truth.norm();
  return o;
}

double tune_recovery_rho(const std::vector<std::uint64_t>& seeds, const PhiSpec& phi, const std::vector<double>& grid,
                         const SolveOptions& opt) {
  if (grid.empty()) throw Error(ErrorKind::InvalidInput, "empty rho grid");
  double best = grid.front();
  int best_hits = -1;
  double best_err = kInf;
  for (double rho : grid) {
    int hits = 0;
    double err = 0.0;
    for (auto s : seeds) {
      const RecoveryOutcome o = run_recovery(s, phi, rho, opt);
      hits += o.rank == 1;
      err += o.rel_error;
    }
    if (hits > best_hits || (hits == best_hits && err < best_err)) {
      best = rho;
      best_hits = hits;
      best_err = err;
    }
  }
  return best;
}

}  // namespace rankstat
