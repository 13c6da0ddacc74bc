#include "commands.hpp"

#include "rankstat/solver.hpp"
#include "rankstat/spectral.hpp"
#include "rankstat/stationarity.hpp"

#include <iomanip>
#include <ostream>

namespace rankstat::cli {

namespace {

void need(const std::string& v, const char* flag) {
  if (v.empty()) throw Error(ErrorKind::InvalidInput, std::string("missing ") + flag);
}

CertOptions cert_options(const Config& c) {
  CertOptions o;
  o.tol = c.tol;
  o.budget = c.budget;
  o.seed = c.seed;
  return o;
}

std::vector<double> grid_of(const Config& c) {
  if (!c.rho_grid.empty()) return parse_rho_grid(c.rho_grid);
  if (c.rho) return {*c.rho};
  return default_rho_grid();
}

}  // namespace

int exit_code(Verdict v) {
  switch (v) {
    case Verdict::Verified: return kVerified;
    case Verdict::Refuted: return kRefuted;
    case Verdict::Unknown: return kUnknown;
  }
  return kUnknown;
}

int run_certify(const Config& c, std::ostream& out) {
  need(c.input, "--input");
  need(c.point, "--point");
  const ProblemSpec prob = load_problem(c.input);
  prob.validate(c.seed);
  const Matrix X = load_matrix(c.point);
  const CertOptions o = cert_options(c);
  const CertKind kind = cert_kind_from_string(c.kind);
  CertReport r;
  switch (kind) {
    case CertKind::R: r = certify_R(prob, X, o); break;
    case CertKind::M: {
      std::optional<Matrix> W;
      if (!c.W.empty()) W = load_matrix(c.W);
      r = certify_M(prob, X, phi_from_tag(c.phi), o, W);
      break;
    }
    case CertKind::EP: r = certify_EP(prob, X, phi_from_tag(c.phi), grid_of(c), o); break;
    case CertKind::DC:
      if (c.rho && c.rho_grid.empty())
        r = certify_DC(prob, X, phi_from_tag(c.phi), *c.rho, o);
      else
        r = certify_DC_grid(prob, X, phi_from_tag(c.phi), grid_of(c), o);
      break;
  }
  write_report(out, r);
  return exit_code(r.status);
}

// --rho for a single solve, --rho-grid as a continuation schedule; --budget
// caps outer iterations and --point is the start.
int run_solve(const Config& c, std::ostream& out) {
  need(c.input, "--input");
  const ProblemSpec prob = load_problem(c.input);
  prob.validate(c.seed);
  SolveOptions o;
  o.max_iter = c.budget;
  o.seed = c.seed;
  if (c.tol_set) o.tol = c.tol;
  if (!c.point.empty()) o.X0 = load_matrix(c.point);
  const PhiSpec phi = phi_from_tag(c.phi);
  std::vector<SolveTrace> traces;
  if (!c.rho_grid.empty())
    traces = penalty_path(prob, phi, parse_rho_grid(c.rho_grid), o);
  else
    traces.push_back(solve_surrogate(prob, phi, c.rho.value_or(1.0), o));
  for (const auto& t : traces) write_trace(out, t);
  return traces.back().converged ? 0 : 1;
}

int run_relate(const Config& c, std::ostream& out) {
  need(c.input, "--input");
  need(c.point, "--point");
  const ProblemSpec prob = load_problem(c.input);
  prob.validate(c.seed);
  const RelationChart ch = relation_chart(prob, load_matrix(c.point), phi_from_tag(c.phi), grid_of(c), cert_options(c));
  write_chart(out, ch);
  return ch.any_violation() ? 1 : 0;
}

int run_validate_phi(const Config& c, std::ostream& out) {
  const PhiSpec phi = phi_from_tag(c.phi);
  const ValidationReport v = validate_phi(phi);
  const CondPhiReport cp = check_cond_phi(phi);
  out << std::setprecision(10);
  out << "phi " << phi.name;
  for (double p : phi.params) out << ' ' << p;
  out << '\n';
  for (const auto& a : v.checks)
    out << "axiom " << a.name << ' ' << (a.passed ? "pass" : "FAIL") << " worst " << a.worst_violation << '\n';
  out << "t_star " << v.t_star << '\n';
  out << "L1 " << v.in_L1 << " L2 " << v.in_L2 << " zero_in_hat_subdiff " << v.zero_in_subdiff_hat_zero << '\n';
  out << "cond_phi " << cp.holds() << " (interval " << cp.interval_match << ", differentiable "
      << cp.hat_conj_differentiable << ", derivative-at-zero " << cp.derivative_at_zero_match << ")\n";
  return v.all_passed() ? 0 : 1;
}

std::vector<ExampleCase> example_cases(double tol, int budget, std::uint64_t seed) {
  const MpsccProblem pr = example_mpscc();
  const Vector z = Vector::Zero(3);
  ImplicationOptions o;
  o.tol = tol;
  o.budget = budget;
  o.seed = seed;
  o.policy = TangentPolicy::PatternOnly;
  std::vector<ExampleCase> cases;
  // w = (w11, w12, w13, w21, w22, w23) of the direction family; case 1 has
  // w12 > 0, case 2 has w12 = 0 and w22 < 0.
  Vector w1 = Vector::Zero(6), w2 = Vector::Zero(6);
  w1(1) = 1.0;
  w2(4) = -1.0;
  cases.push_back({"case 1 (w12 > 0, w22 = 0)", w1, implication_check(pr, z, z, w1, o)});
  cases.push_back({"case 2 (w12 = 0, w22 < 0)", w2, implication_check(pr, z, z, w2, o)});
  return cases;
}

int run_example_mpscc(const Config& c, std::ostream& out) {
  const double tol = c.tol_set ? c.tol : 1e-10;
  const auto cases = example_cases(tol, c.budget, c.seed);
  bool all = true;
  for (const auto& cs : cases) {
    out << "== " << cs.label << '\n';
    write_implication(out, cs.result);
    const ImplicationVerdict v = cs.result.verdict;
    all = all && v == ImplicationVerdict::HoldsOnBranches;
    int dim = 0;
    for (const auto& b : cs.result.branches) dim = std::max(dim, b.nullspace_dim);
    out << "zero-nullspace " << (dim == 0 ? "yes" : "no") << " -> (d1, d2, Lambda, Delta) = "
        << (dim == 0 && v == ImplicationVerdict::HoldsOnBranches ? "(0, 0, 0, 0)" : "not forced to zero") << '\n';
  }
  if (all)
    out << "conclusion: the global minimizer (xbar, ybar) = (0, 0) is M-stationary\n";
  else
    out << "conclusion: M-stationarity not established\n";
  return all ? 0 : 1;
}

}  // namespace rankstat::cli
