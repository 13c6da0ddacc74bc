#pragma once

#include "rankstat/common.hpp"
#include "rankstat/spectral.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace rankstat {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Closed interval [lo, hi]; lo > hi encodes the empty set. Infinite ends are
// allowed and encode half-lines.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool empty() const { return lo > hi; }
  bool contains(double x, double tol = 0.0) const { return !empty() && x >= lo - tol && x <= hi + tol; }
  // Point of the interval closest to x.
  double project(double x) const;
  static Interval none() { return {1.0, 0.0}; }
};

using RealFn = std::function<double(double)>;

// A penalty generator phi together with the data derived from it. Built by the
// factory functions below; immutable afterwards.
struct PhiSpec {
  std::string name;
  RealFn eval;
  RealFn d_left;
  RealFn d_right;
  std::vector<double> params;

  double t_star = 0.0;
  bool in_L1 = false;   // differentiable on (0,1]
  bool in_L2 = false;   // nondecreasing on [0,1]
  Interval subdiff_hat_at_zero;
  // When phi'_+(0) < 0 the even extension is not convex at 0 and its limiting
  // subdifferential there is the two-point set {phi'_+(0), -phi'_+(0)}.
  bool hat_zero_two_point = false;
  bool zero_in_subdiff_hat_zero = false;

  // Optional closed forms of psi^* and (psi^*)'.
  RealFn conj_closed;
  RealFn conj_deriv_closed;

  // Derived from check_cond_phi at construction.
  bool conj_differentiable = false;
  bool cond_phi = false;
};

// psi = phi on [0,1], +inf elsewhere.
class PsiSpec {
 public:
  explicit PsiSpec(PhiSpec phi) : base_(std::move(phi)) {}

  const PhiSpec& base() const { return base_; }

  double eval(double t) const;
  // psi^*(s) = sup_{t in [0,1]} s t - phi(t).
  double conj(double s) const;
  // A maximizer of s t - phi(t); equals (psi^*)'(s) where differentiable.
  double conj_deriv(double s) const;
  // One-sided derivatives of psi^* (ends of the argmax set).
  double conj_deriv_left(double s) const;
  double conj_deriv_right(double s) const;
  double hat_conj(double s) const { return conj(std::abs(s)); }
  // Convex subdifferential of psi at t.
  Interval subdiff(double t) const;

 private:
  PhiSpec base_;
};

struct ConjugateValue {
  double value;
  double argmax;
};

// Generic sup_{t in [0,1]} s t - phi(t) by golden-section search refined to a
// bracket of width `bracket`, compared against both endpoints.
ConjugateValue golden_section_conjugate(const RealFn& phi, double s, double bracket = 1e-12);

PhiSpec make_phi(std::string name, RealFn eval, RealFn d_left, RealFn d_right, std::vector<double> params = {});
PhiSpec quadratic_phi(double a);
PhiSpec linear_phi();
PhiSpec square_phi();
// Piecewise-linear phi through (t_k, v_k); extended linearly outside the table.
PhiSpec tabulated_phi(const std::vector<double>& t, const std::vector<double>& v);
// "quad:a=<real>", "linear", "square", "table:<path>".
PhiSpec phi_from_tag(const std::string& tag);

struct AxiomCheck {
  std::string name;
  bool passed;
  double worst_violation;
};

struct ValidationReport {
  std::vector<AxiomCheck> checks;
  double t_star = 0.0;
  bool in_L1 = false;
  bool in_L2 = false;
  bool zero_in_subdiff_hat_zero = false;
  bool all_passed() const;
};

ValidationReport validate_phi(const PhiSpec& phi, int grid_size = 1001);

double psi_conjugate(const PsiSpec& psi, double s);

struct CondPhiReport {
  bool interval_match = false;       // subdifferentials of psi and psi-hat at 0 agree on R_+
  bool hat_conj_differentiable = false;
  bool derivative_at_zero_match = false;
  double worst_derivative_gap = 0.0;
  bool holds() const { return interval_match && hat_conj_differentiable && derivative_at_zero_match; }
};

CondPhiReport check_cond_phi(const PhiSpec& phi, int grid_size = 1001);

struct SpectralSubdiff {
  std::vector<Interval> intervals;  // per singular value of W
  Vector wbar;
  Matrix DeltaW;
};

SpectralSubdiff spectral_phi_subdiff(const Matrix& W, const PhiSpec& phi, const SvdFrame& frame, double tol = 1e-8);
SpectralSubdiff spectral_phi_subdiff(const Matrix& W, const PhiSpec& phi, double tol = 1e-8);

// U Diag((psi^*)'(rho sigma_i(X))) V^T.
Matrix grad_psi_star_spectral(const Matrix& X, double rho, const PsiSpec& psi);
Matrix grad_psi_star_spectral(const SvdFrame& frameX, double rho, const PsiSpec& psi);

// sum_i psi^*(rho sigma_i(X)).
double psi_star_spectral_sum(const Vector& sigma, double rho, const PsiSpec& psi);

}  // namespace rankstat
