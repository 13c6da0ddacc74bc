#pragma once

#include "rankstat/solver.hpp"

#include <algorithm>

namespace testutil {

// Seeded recovery solves at a fixed rho: worst objective increase between
// consecutive iterates, worst DC residual and EP verdicts at the same rho.
struct DescentStats {
  int solves = 0;
  double max_increase = 0.0;
  double max_dc_residual = 0.0;
  int dc_verified = 0;
  int ep_verified = 0;
  int converged = 0;
};

inline DescentStats descent_harness(std::uint64_t seed0, int count, double rho, double cert_tol) {
  using namespace rankstat;
  const PhiSpec phi = quadratic_phi(3);
  DescentStats st;
  for (int s = 0; s < count; ++s) {
    const RecoveryInstance inst = planted_rank_one(seed0 + s);
    const SolveTrace tr = solve_surrogate(inst.prob, phi, rho);
    for (size_t k = 1; k < tr.rows.size(); ++k)
      st.max_increase = std::max(st.max_increase, tr.rows[k].objective - tr.rows[k - 1].objective);
    CertOptions co;
    co.tol = cert_tol;
    const CertReport dc = certify_DC(inst.prob, tr.X, phi, rho, co);
    const CertReport ep = certify_EP(inst.prob, tr.X, phi, {rho}, co);
    st.max_dc_residual = std::max(st.max_dc_residual, dc.residual("DC:balance"));
    st.dc_verified += dc.status == Verdict::Verified;
    st.ep_verified += ep.status == Verdict::Verified;
    st.converged += tr.converged;
    ++st.solves;
  }
  return st;
}

}  // namespace testutil
