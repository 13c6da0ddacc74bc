#include "rankstat/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rankstat {

namespace {

constexpr double kInvGolden = 0.6180339887498949;
constexpr double kDerivEps = 1e-9;

// Minimizer of a convex function on [a, b] by golden-section search.
double golden_min(const RealFn& f, double a, double b, double bracket) {
  double c = b - kInvGolden * (b - a);
  double d = a + kInvGolden * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > bracket) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvGolden * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvGolden * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

double find_t_star(const RealFn& phi, int grid) {
  int best = 0;
  double best_val = phi(0.0);
  for (int k = 1; k < grid; ++k) {
    double v = phi(static_cast<double>(k) / (grid - 1));
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }
  const double h = 1.0 / (grid - 1);
  double lo = std::max(0.0, (best - 1) * h);
  double hi = std::min(1.0, (best + 1) * h);
  double t = golden_min(phi, lo, hi, 1e-13);
  if (phi(lo) <= phi(t)) t = lo;
  if (phi(hi) < phi(t)) t = hi;
  if (t < 1e-10) t = 0.0;
  return t;
}

struct Flags {
  bool in_L1 = true;
  bool in_L2 = true;
};

Flags family_flags(const PhiSpec& phi, int grid) {
  Flags f;
  for (int k = 1; k < grid; ++k) {
    double t = static_cast<double>(k) / (grid - 1);
    double dl = phi.d_left(t), dr = phi.d_right(t);
    if (std::abs(dr - dl) > 1e-8 * std::max(1.0, std::abs(dl))) f.in_L1 = false;
  }
  if (phi.d_right(0.0) < -1e-12) f.in_L2 = false;
  double prev = phi.eval(0.0);
  for (int k = 1; k < grid; ++k) {
    double v = phi.eval(static_cast<double>(k) / (grid - 1));
    if (v < prev - 1e-12) f.in_L2 = false;
    prev = v;
  }
  return f;
}

void set_hat_zero(PhiSpec& phi) {
  const double d0 = phi.d_right(0.0);
  if (d0 >= 0.0) {
    phi.subdiff_hat_at_zero = {-d0, d0};
    phi.hat_zero_two_point = false;
    phi.zero_in_subdiff_hat_zero = true;
  } else {
    phi.subdiff_hat_at_zero = {d0, -d0};
    phi.hat_zero_two_point = true;
    phi.zero_in_subdiff_hat_zero = false;
  }
}

}  // namespace

double Interval::project(double x) const {
  if (empty()) return x;
  return std::clamp(x, lo, hi);
}

ConjugateValue golden_section_conjugate(const RealFn& phi, double s, double bracket) {
  RealFn neg = [&](double t) { return phi(t) - s * t; };
  double t = golden_min(neg, 0.0, 1.0, bracket);
  double best = s * t - phi(t);
  const double g0 = -phi(0.0);
  const double g1 = s - phi(1.0);
  if (g0 >= best) {
    best = g0;
    t = 0.0;
  }
  if (g1 > best) {
    best = g1;
    t = 1.0;
  }
  return {best, t};
}

double PsiSpec::eval(double t) const {
  if (t < 0.0 || t > 1.0) return kInf;
  return base_.eval(t);
}

double PsiSpec::conj(double s) const {
  if (base_.conj_closed) return base_.conj_closed(s);
  return golden_section_conjugate(base_.eval, s).value;
}

double PsiSpec::conj_deriv(double s) const {
  if (base_.conj_deriv_closed) return base_.conj_deriv_closed(s);
  return golden_section_conjugate(base_.eval, s).argmax;
}

double PsiSpec::conj_deriv_left(double s) const {
  const double x = s - kDerivEps;
  if (base_.conj_deriv_closed) return base_.conj_deriv_closed(x);
  return golden_section_conjugate(base_.eval, x).argmax;
}

double PsiSpec::conj_deriv_right(double s) const {
  const double x = s + kDerivEps;
  if (base_.conj_deriv_closed) return base_.conj_deriv_closed(x);
  return golden_section_conjugate(base_.eval, x).argmax;
}

Interval PsiSpec::subdiff(double t) const {
  if (t < 0.0 || t > 1.0) return Interval::none();
  if (t == 0.0) return {-kInf, base_.d_right(0.0)};
  if (t == 1.0) return {base_.d_left(1.0), kInf};
  return {base_.d_left(t), base_.d_right(t)};
}

PhiSpec make_phi(std::string name, RealFn eval, RealFn d_left, RealFn d_right, std::vector<double> params) {
  PhiSpec phi;
  phi.name = std::move(name);
  phi.eval = std::move(eval);
  phi.d_left = std::move(d_left);
  phi.d_right = std::move(d_right);
  phi.params = std::move(params);
  phi.t_star = find_t_star(phi.eval, 1001);
  Flags f = family_flags(phi, 1001);
  phi.in_L1 = f.in_L1;
  phi.in_L2 = f.in_L2;
  set_hat_zero(phi);
  return phi;
}

namespace {

PhiSpec finish(PhiSpec phi) {
  CondPhiReport r = check_cond_phi(phi);
  phi.conj_differentiable = r.hat_conj_differentiable && r.derivative_at_zero_match;
  phi.cond_phi = r.holds();
  return phi;
}

}  // namespace

PhiSpec quadratic_phi(double a) {
  if (!(a > 1.0) || !std::isfinite(a)) throw Error(ErrorKind::InvalidInput, "quadratic phi needs a > 1");
  const double c = (a - 1.0) / (a + 1.0);
  const double b = 2.0 / (a + 1.0);
  RealFn f = [c, b](double t) { return c * t * t + b * t; };
  RealFn df = [c, b](double t) { return 2.0 * c * t + b; };
  std::ostringstream name;
  name << "quad:a=" << a;
  PhiSpec phi = make_phi(name.str(), f, df, df, {a});
  const double lo = 2.0 / (a + 1.0);
  const double hi = 2.0 * a / (a + 1.0);
  phi.conj_closed = [a, lo, hi](double w) {
    if (w <= lo) return 0.0;
    if (w <= hi) {
      const double u = (a + 1.0) * w - 2.0;
      return u * u / (4.0 * (a * a - 1.0));
    }
    return w - 1.0;
  };
  phi.conj_deriv_closed = [a, lo, hi](double w) {
    if (w <= lo) return 0.0;
    if (w <= hi) return ((a + 1.0) * w - 2.0) / (2.0 * (a - 1.0));
    return 1.0;
  };
  return finish(std::move(phi));
}

PhiSpec linear_phi() {
  RealFn f = [](double t) { return t; };
  RealFn df = [](double) { return 1.0; };
  return finish(make_phi("linear", f, df, df));
}

PhiSpec square_phi() {
  RealFn f = [](double t) { return t * t; };
  RealFn df = [](double t) { return 2.0 * t; };
  return finish(make_phi("square", f, df, df));
}

PhiSpec tabulated_phi(const std::vector<double>& t, const std::vector<double>& v) {
  if (t.size() != v.size() || t.size() < 2) throw Error(ErrorKind::InvalidInput, "table needs at least two (t, phi) pairs");
  for (size_t k = 1; k < t.size(); ++k)
    if (!(t[k] > t[k - 1])) throw Error(ErrorKind::InvalidInput, "table abscissae must increase");
  if (t.front() > 0.0 || t.back() < 1.0) throw Error(ErrorKind::InvalidInput, "table must cover [0,1]");
  std::vector<double> slope(t.size() - 1);
  for (size_t k = 0; k + 1 < t.size(); ++k) slope[k] = (v[k + 1] - v[k]) / (t[k + 1] - t[k]);
  for (size_t k = 1; k < slope.size(); ++k)
    if (slope[k] < slope[k - 1] - 1e-12) throw Error(ErrorKind::InvalidInput, "table is not convex");

  auto segment = [t](double x) {
    auto it = std::upper_bound(t.begin(), t.end(), x);
    long k = static_cast<long>(it - t.begin()) - 1;
    return std::clamp<long>(k, 0, static_cast<long>(t.size()) - 2);
  };
  RealFn f = [t, v, slope, segment](double x) {
    long k = segment(x);
    return v[k] + slope[k] * (x - t[k]);
  };
  RealFn dl = [t, slope](double x) {
    auto it = std::lower_bound(t.begin(), t.end(), x);
    long k = static_cast<long>(it - t.begin()) - 1;
    return slope[std::clamp<long>(k, 0, static_cast<long>(slope.size()) - 1)];
  };
  RealFn dr = [t, slope](double x) {
    auto it = std::upper_bound(t.begin(), t.end(), x);
    long k = static_cast<long>(it - t.begin()) - 1;
    return slope[std::clamp<long>(k, 0, static_cast<long>(slope.size()) - 1)];
  };
  std::vector<double> params;
  for (size_t k = 0; k < t.size(); ++k) {
    params.push_back(t[k]);
    params.push_back(v[k]);
  }
  return finish(make_phi("table", f, dl, dr, params));
}

PhiSpec phi_from_tag(const std::string& tag) {
  if (tag.rfind("quad:a=", 0) == 0) {
    const std::string num = tag.substr(7);
    double a = 0.0;
    try {
      size_t used = 0;
      a = std::stod(num, &used);
      if (used != num.size()) throw std::invalid_argument(num);
    } catch (const std::exception&) {
      throw Error(ErrorKind::ParseError, "bad phi tag '" + tag + "'");
    }
    return quadratic_phi(a);
  }
  if (tag == "linear") return linear_phi();
  if (tag == "square") return square_phi();
  if (tag.rfind("table:", 0) == 0) {
    std::ifstream in(tag.substr(6));
    if (!in) throw Error(ErrorKind::ParseError, "cannot open phi table " + tag.substr(6));
    std::vector<double> t, v;
    double a, b;
    while (in >> a >> b) {
      t.push_back(a);
      v.push_back(b);
    }
    if (!in.eof()) throw Error(ErrorKind::ParseError, "bad phi table " + tag.substr(6));
    return tabulated_phi(t, v);
  }
  throw Error(ErrorKind::ParseError, "unknown phi tag '" + tag + "'");
}

bool ValidationReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const AxiomCheck& c) { return c.passed; });
}

ValidationReport validate_phi(const PhiSpec& phi, int grid_size) {
  if (grid_size < 100) throw Error(ErrorKind::InvalidInput, "grid_size must be at least 100");
  std::vector<double> t(grid_size), v(grid_size);
  for (int k = 0; k < grid_size; ++k) {
    t[k] = static_cast<double>(k) / (grid_size - 1);
    double val;
    try {
      val = phi.eval(t[k]);
    } catch (const std::exception& e) {
      throw Error(ErrorKind::DomainError, std::string("phi evaluation failed: ") + e.what());
    }
    if (!std::isfinite(val)) throw Error(ErrorKind::DomainError, "phi is not finite on [0,1]");
    v[k] = val;
  }
  ValidationReport r;
  r.t_star = find_t_star(phi.eval, grid_size);
  const double tol = 1e-10;
  const double phi_ts = phi.eval(r.t_star);
  const double grid_min = *std::min_element(v.begin(), v.end());

  auto add = [&r](std::string name, double viol, double thresh) {
    r.checks.push_back({std::move(name), viol <= thresh, viol});
  };
  add("phi(1) = 1", std::abs(phi.eval(1.0) - 1.0), tol);
  add("phi(t*) = 0", std::abs(phi_ts), tol);
  add("t* minimizes phi on [0,1]", std::max(0.0, phi_ts - grid_min), tol);
  add("t* < 1", r.t_star < 1.0 ? 0.0 : 1.0, 0.0);
  double convex_viol = 0.0;
  for (int k = 1; k + 1 < grid_size; ++k) {
    double s0 = (v[k] - v[k - 1]) / (t[k] - t[k - 1]);
    double s1 = (v[k + 1] - v[k]) / (t[k + 1] - t[k]);
    convex_viol = std::max(convex_viol, s0 - s1);
  }
  add("convex on [0,1]", convex_viol, 1e-7);
  const double d0 = phi.d_left(0.0), d1 = phi.d_right(1.0);
  add("[0,1] inside the interior of dom phi", (std::isfinite(d0) && std::isfinite(d1)) ? 0.0 : 1.0, 0.0);

  Flags f = family_flags(phi, grid_size);
  r.in_L1 = f.in_L1;
  r.in_L2 = f.in_L2;
  r.zero_in_subdiff_hat_zero = phi.d_right(0.0) >= 0.0;
  return r;
}

double psi_conjugate(const PsiSpec& psi, double s) { return psi.conj(s); }

CondPhiReport check_cond_phi(const PhiSpec& phi, int grid_size) {
  CondPhiReport r;
  const double tol = 1e-6;
  PsiSpec psi(phi);
  const double d0 = phi.d_right(0.0);

  // Both sets intersected with R_+ (the multipliers that occur are nonnegative).
  Interval psi0{0.0, d0};  // (-inf, d0] cut to R_+
  Interval hat0 = d0 >= 0.0 ? Interval{0.0, d0} : Interval{-d0, -d0};
  r.interval_match = (psi0.empty() && hat0.empty() && d0 >= -1e-12) ||
                     (!psi0.empty() && !hat0.empty() && std::abs(psi0.lo - hat0.lo) <= 1e-12 &&
                      std::abs(psi0.hi - hat0.hi) <= 1e-12);

  const double smax = std::max(2.0, phi.d_left(1.0) + 1.0);
  double worst = 0.0;
  for (int k = 0; k < grid_size; ++k) {
    const double s = smax * k / (grid_size - 1);
    double right = psi.conj_deriv_right(s);
    // psi-hat^*(s) = psi^*(|s|), so at s = 0 the left derivative is -(psi^*)'_+(0).
    double left = k == 0 ? -right : psi.conj_deriv_left(s);
    worst = std::max(worst, std::abs(right - left));
  }
  r.worst_derivative_gap = worst;
  r.hat_conj_differentiable = worst <= tol;

  const double dl0 = psi.conj_deriv_left(0.0);
  const double dr0 = psi.conj_deriv_right(0.0);
  r.derivative_at_zero_match = std::abs(dl0 - dr0) <= tol && std::abs(dr0) <= tol;
  return r;
}

SpectralSubdiff spectral_phi_subdiff(const Matrix& W, const PhiSpec& phi, const SvdFrame& frame, double tol) {
  const int m = static_cast<int>(W.rows());
  const int n = static_cast<int>(W.cols());
  if (m > 0 && frame.sigma(0) > 1.0 + tol) throw Error(ErrorKind::OutOfDomain, "spectral norm of W exceeds 1");
  SpectralSubdiff out;
  out.wbar = Vector::Zero(m);
  for (int i = 0; i < m; ++i) {
    const double s = frame.sigma(i);
    Interval iv;
    double w;
    if (std::abs(s - 1.0) <= tol) {
      iv = {phi.d_left(1.0), kInf};
      w = phi.d_left(1.0);
    } else if (s <= tol) {
      iv = phi.subdiff_hat_at_zero;
      w = phi.hat_zero_two_point ? iv.hi : iv.project(0.0);
    } else {
      iv = {phi.d_left(s), phi.d_right(s)};
      w = iv.project(0.0);
    }
    out.intervals.push_back(iv);
    out.wbar(i) = w;
  }
  Matrix D = Matrix::Zero(m, n);
  for (int i = 0; i < m; ++i) D(i, i) = out.wbar(i);
  out.DeltaW = frame.U * D * frame.V.transpose();
  return out;
}

SpectralSubdiff spectral_phi_subdiff(const Matrix& W, const PhiSpec& phi, double tol) {
  return spectral_phi_subdiff(W, phi, svd(W), tol);
}

Matrix grad_psi_star_spectral(const SvdFrame& f, double rho, const PsiSpec& psi) {
  if (!(rho > 0)) throw Error(ErrorKind::InvalidInput, "rho must be positive");
  if (!psi.base().conj_differentiable)
    throw Error(ErrorKind::UnsupportedPhi, "psi-hat conjugate is not differentiable on R_+");
  const int m = static_cast<int>(f.U.rows());
  const int n = static_cast<int>(f.V.rows());
  Matrix D = Matrix::Zero(m, n);
  for (int i = 0; i < m; ++i) D(i, i) = psi.conj_deriv(rho * f.sigma(i));
  return f.U * D * f.V.transpose();
}

Matrix grad_psi_star_spectral(const Matrix& X, double rho, const PsiSpec& psi) {
  return grad_psi_star_spectral(svd(X), rho, psi);
}

double psi_star_spectral_sum(const Vector& sigma, double rho, const PsiSpec& psi) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) s += psi.conj(rho * sigma(i));
  return s;
}

}  // namespace rankstat
