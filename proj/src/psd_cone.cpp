#include "rankstat/psd_cone.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace rankstat {

namespace {

void require_symmetric(const Matrix& A, const char* what) {
  if (!A.allFinite()) throw Error(ErrorKind::InvalidMatrix, std::string(what) + " has a non-finite entry");
  if (A.rows() != A.cols() || !is_symmetric(A, 1e-10))
    throw Error(ErrorKind::InvalidMatrix, std::string(what) + " is not symmetric");
}

double lmax(const Matrix& S) {
  if (S.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(S), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double lmin(const Matrix& S) {
  if (S.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(S), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Matrix cols(const Matrix& A, const Index& idx) {
  Matrix B(A.rows(), idx.size());
  for (size_t j = 0; j < idx.size(); ++j) B.col(j) = A.col(idx[j]);
  return B;
}

Matrix rot2(double th, int refl) {
  Matrix R(2, 2);
  const double c = std::cos(th), s = std::sin(th);
  if (refl == 0)
    R << c, -s, s, c;
  else
    R << c, s, s, -c;
  return R;
}

void add(std::vector<ResidualEntry>& r, const std::string& name, double v) { r.push_back({name, v}); }

std::string index_str(const Index& idx) {
  std::string s;
  for (size_t i = 0; i < idx.size(); ++i) s += (i ? "," : "") + std::to_string(idx[i] + 1);
  return s;
}

std::string part_str(const BetaPartition& p) {
  return "+{" + index_str(p.plus) + "} 0{" + index_str(p.zero) + "} -{" + index_str(p.minus) + "}";
}

}  // namespace

Matrix project_psd(const Matrix& A) {
  require_symmetric(A, "A");
  if (A.size() == 0) return A;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(A));
  Vector l = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * l.asDiagonal() * es.eigenvectors().transpose();
}

bool graph_membership_psd(const Matrix& X, const Matrix& Y, double tol) {
  require_symmetric(X, "X");
  require_symmetric(Y, "Y");
  return (X - project_psd(X + Y)).norm() <= tol * std::max(1.0, X.norm() + Y.norm());
}

PsdGraphPoint psd_graph_point(const Matrix& X, const Matrix& Y, double class_tol) {
  require_symmetric(X, "X");
  require_symmetric(Y, "Y");
  if (X.rows() != Y.rows()) throw Error(ErrorKind::InvalidInput, "X and Y differ in size");
  if (!graph_membership_psd(X, Y, 1e-9)) throw Error(ErrorKind::NotOnGraph, "X != Pi_S+(X + Y)");
  const Matrix A = X + Y;
  if (class_tol <= 0) class_tol = default_class_tol(A);
  EigResult e = eig_sym(A, class_tol);
  PsdGraphPoint p;
  p.X = X;
  p.Y = Y;
  p.frame = e.frame;
  p.sets = e.sets;
  return p;
}

Matrix psd_sigma(const Vector& lambda, const PsdIndexSets& sets) {
  const int n = static_cast<int>(lambda.size());
  Vector l = lambda;
  for (int i : sets.beta) l(i) = 0.0;
  std::vector<bool> inbeta(n, false);
  for (int i : sets.beta) inbeta[i] = true;
  Matrix S = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (inbeta[i] && inbeta[j]) continue;
      if (std::abs(l(i) - l(j)) <= sets.class_tol)
        S(i, j) = l(i) > 0 ? 1.0 : 0.0;
      else
        S(i, j) = (std::max(0.0, l(i)) - std::max(0.0, l(j))) / (l(i) - l(j));
    }
  return S;
}

Matrix sigma_alpha_gamma(const PsdGraphPoint& p) {
  return block(psd_sigma(p.frame.lambda, p.sets), p.sets.alpha, p.sets.gamma);
}

Matrix project_psd_derivative(const Matrix& A, const Matrix& D, double class_tol) {
  require_symmetric(A, "A");
  require_symmetric(D, "D");
  if (class_tol <= 0) class_tol = default_class_tol(A);
  EigResult e = eig_sym(A, class_tol);
  const Matrix& P = e.frame.P;
  const Matrix Dt = P.transpose() * D * P;
  Matrix R = psd_sigma(e.frame.lambda, e.sets).cwiseProduct(Dt);
  const Index& b = e.sets.beta;
  set_block(R, b, b, project_psd(sym(block(Dt, b, b))));
  return P * R * P.transpose();
}

double TangentReport::residual(const std::string& block) const {
  for (const auto& r : residuals)
    if (r.block == block) return r.value;
  throw Error(ErrorKind::InvalidInput, "no residual named " + block);
}

TangentReport tangent_gph_psd_report(const PsdGraphPoint& p, const Matrix& G, const Matrix& H, double tol,
                                     TangentPolicy policy) {
  require_symmetric(G, "G");
  require_symmetric(H, "H");
  const Matrix& P = p.frame.P;
  const Matrix Gt = P.transpose() * G * P, Ht = P.transpose() * H * P;
  const Index &a = p.sets.alpha, &b = p.sets.beta, &c = p.sets.gamma;
  TangentReport r;
  r.threshold = tol * std::max(1.0, G.norm() + H.norm());
  add(r.residuals, "pattern:G", std::hypot(block(Gt, b, c).norm() * std::sqrt(2.0), block(Gt, c, c).norm()));
  add(r.residuals, "pattern:H",
      std::hypot(block(Ht, a, a).norm(), block(Ht, a, b).norm() * std::sqrt(2.0)));
  const Matrix Sag = sigma_alpha_gamma(p);
  const Matrix Eag = Matrix::Ones(a.size(), c.size());
  add(r.residuals, "alpha-gamma",
      ((Eag - Sag).cwiseProduct(block(Gt, a, c)) - Sag.cwiseProduct(block(Ht, a, c))).norm());
  const Matrix Gbb = block(Gt, b, b), Hbb = block(Ht, b, b);
  add(r.residuals, "beta-beta", (Gbb - project_psd(sym(Gbb + Hbb))).norm());
  r.tangent = true;
  for (const auto& e : r.residuals) {
    if (policy == TangentPolicy::PatternOnly && e.block == "alpha-gamma") continue;
    if (e.value > r.threshold) r.tangent = false;
  }
  return r;
}

bool tangent_gph_psd(const PsdGraphPoint& p, const Matrix& G, const Matrix& H, double tol) {
  return tangent_gph_psd_report(p, G, H, tol).tangent;
}

DirectionalData directional_data(const PsdGraphPoint& p, const Matrix& G, const Matrix& H, double class_tol) {
  DirectionalData d;
  d.G = G;
  d.H = H;
  const Matrix Pb = cols(p.frame.P, p.sets.beta);
  d.B = sym(Pb.transpose() * (G + H) * Pb);
  if (class_tol <= 0) class_tol = default_class_tol(d.B);
  EigResult e = eig_sym(d.B, class_tol);
  d.UB = e.frame.P;
  d.lambdaB = e.frame.lambda;
  d.pi = e.sets.alpha;
  d.delta = e.sets.beta;
  d.nu = e.sets.gamma;
  d.Gamma_pinu = Matrix::Zero(d.pi.size(), d.nu.size());
  for (size_t i = 0; i < d.pi.size(); ++i)
    for (size_t j = 0; j < d.nu.size(); ++j) {
      const double li = d.lambdaB(d.pi[i]), lj = d.lambdaB(d.nu[j]);
      d.Gamma_pinu(i, j) = li / (li - lj);
    }
  return d;
}

PartitionXi psd_xi_hat(int k, const BetaPartition& part, const Matrix& xi_pm) {
  if (xi_pm.size() > 0 && (xi_pm.minCoeff() < 0.0 || xi_pm.maxCoeff() > 1.0))
    throw Error(ErrorKind::InvalidInput, "Xi entries must lie in [0,1]");
  // Same block layout as the min(1,.) limits with the two factors swapped.
  PartitionXi x = enumerate_xi(k, part, Matrix::Ones(xi_pm.rows(), xi_pm.cols()) - xi_pm);
  std::swap(x.Xi1, x.Xi2);
  x.Xi1_pm = xi_pm;
  return x;
}

namespace {

// Residual of the beta-beta rows that do not depend on the delta search.
double fixed_beta_residual(const DirectionalData& d, const Matrix& Ub, const Matrix& Vb) {
  const Matrix U = d.UB.transpose() * Ub * d.UB, V = d.UB.transpose() * Vb * d.UB;
  const Index &pi = d.pi, &de = d.delta, &nu = d.nu;
  double sq = 0.0;
  sq += block(U, pi, pi).squaredNorm();
  sq += 2.0 * block(U, pi, de).squaredNorm();
  sq += 2.0 * (d.Gamma_pinu.cwiseProduct(block(U, pi, nu)) +
               (Matrix::Ones(pi.size(), nu.size()) - d.Gamma_pinu).cwiseProduct(block(V, pi, nu)))
                  .squaredNorm();
  sq += 2.0 * block(V, de, nu).squaredNorm();
  sq += block(V, nu, nu).squaredNorm();
  return std::sqrt(sq);
}

}  // namespace

ConeMembershipCertificate directional_normal_membership_psd(const PsdGraphPoint& p, const Matrix& G, const Matrix& H,
                                                            const Matrix& Xs, const Matrix& Ys,
                                                            const SearchOptions& opt, TangentPolicy policy) {
  require_symmetric(Xs, "X*");
  require_symmetric(Ys, "Y*");
  if (!tangent_gph_psd_report(p, G, H, std::max(opt.tol, 1e-9), policy).tangent)
    throw Error(ErrorKind::NotTangentDirection, "(G, H) is not tangent to the graph");
  const DirectionalData d = directional_data(p, G, H);
  const Matrix& P = p.frame.P;
  const Matrix Xt = P.transpose() * Xs * P, Yt = P.transpose() * Ys * P;
  const Index &a = p.sets.alpha, &b = p.sets.beta, &c = p.sets.gamma;

  ConeMembershipCertificate cert;
  cert.threshold = opt.tol * std::max(1.0, Xs.norm() + Ys.norm());
  add(cert.residuals, "pattern:X*", std::hypot(block(Xt, a, a).norm(), block(Xt, a, b).norm() * std::sqrt(2.0)));
  add(cert.residuals, "pattern:Y*", std::hypot(block(Yt, b, c).norm() * std::sqrt(2.0), block(Yt, c, c).norm()));
  const Matrix Sag = sigma_alpha_gamma(p);
  add(cert.residuals, "alpha-gamma",
      (Sag.cwiseProduct(block(Xt, a, c)) +
       (Matrix::Ones(a.size(), c.size()) - Sag).cwiseProduct(block(Yt, a, c)))
          .norm());
  const Matrix Ub = block(Xt, b, b), Vb = block(Yt, b, b);
  add(cert.residuals, "beta-beta:fixed", fixed_beta_residual(d, Ub, Vb));

  for (const auto& r : cert.residuals)
    if (r.value > cert.threshold) {
      cert.verdict = Verdict::Refuted;
      cert.note = "search-free condition " + r.block + " fails";
      add(cert.residuals, "beta-beta:delta", 0.0);
      return cert;
    }

  const Matrix Ud = cols(d.UB, d.delta);
  const Matrix M = sym(Ud.transpose() * Ub * Ud), N = sym(Ud.transpose() * Vb * Ud);
  BetaSearchResult s = search_beta_block(M, N, cert.threshold, opt);
  add(cert.residuals, "beta-beta:delta", s.best_cost);
  if (s.found) {
    cert.verdict = Verdict::Verified;
    const int kb = static_cast<int>(b.size()), kd = static_cast<int>(d.delta.size());
    Matrix R = Matrix::Identity(kb, kb);
    if (kd > 0) set_block(R, d.delta, d.delta, s.Q);
    ConeWitness w;
    w.Q = d.UB * R;
    w.xi = kd > 0 ? psd_xi_hat(kd, s.fit.xi.part,
                               Matrix::Ones(s.fit.xi.Xi1_pm.rows(), s.fit.xi.Xi1_pm.cols()) - s.fit.xi.Xi1_pm)
                  : PartitionXi{};
    cert.witness = w;
    return cert;
  }
  if (s.exhaustive) {
    cert.verdict = Verdict::Refuted;
    cert.note = "delta-block condition fails for every partition";
  } else {
    cert.verdict = Verdict::Unknown;
    cert.note = "no delta-block witness within budget";
  }
  return cert;
}

bool regular_normal_gph_psd(const Matrix& Xp, const Matrix& Yp, const Matrix& Xs, const Matrix& Ys, double tol) {
  require_symmetric(Xs, "X*");
  require_symmetric(Ys, "Y*");
  const PsdGraphPoint p = psd_graph_point(Xp, Yp);
  const Matrix& P = p.frame.P;
  const Matrix Xt = P.transpose() * Xs * P, Yt = P.transpose() * Ys * P;
  const Matrix S = psd_sigma(p.frame.lambda, p.sets);
  const int n = static_cast<int>(Xs.rows());
  Matrix R = S.cwiseProduct(Xt) + (Matrix::Ones(n, n) - S).cwiseProduct(Yt);
  const Index& b = p.sets.beta;
  set_block(R, b, b, Matrix::Zero(b.size(), b.size()));
  const double thr = tol * std::max(1.0, Xs.norm() + Ys.norm());
  if (R.norm() > thr) return false;
  return lmax(block(Xt, b, b)) <= thr && lmin(block(Yt, b, b)) >= -thr;
}

// ---------------------------------------------------------------------------
// MPSCC data

namespace {

Matrix unvec(const Vector& v, int n) { return Eigen::Map<const Matrix>(v.data(), n, n); }

Vector vec(const Matrix& A) { return Eigen::Map<const Vector>(A.data(), A.size()); }

}  // namespace

Matrix MpsccProblem::f(const Vector& x, const Vector& y) const {
  return unvec(Fx * x + Fy * y, n) + C;
}

Matrix MpsccProblem::g(const Vector& x, const Vector& y) const {
  return unvec(Gx * x + Gy * y, n) + D;
}

void MpsccProblem::validate() const {
  const long nn = static_cast<long>(n) * n;
  auto shape = [&](const Matrix& A, long r, long c, const char* name) {
    if (A.rows() != r || A.cols() != c)
      throw Error(ErrorKind::InvalidInput, std::string(name) + " has shape " + std::to_string(A.rows()) + "x" +
                                               std::to_string(A.cols()) + ", expected " + std::to_string(r) + "x" +
                                               std::to_string(c));
  };
  if (n <= 0 || px < 0 || py < 0) throw Error(ErrorKind::InvalidInput, "bad dimensions");
  shape(Fx, nn, px, "Fx");
  shape(Fy, nn, py, "Fy");
  shape(Gx, nn, px, "Gx");
  shape(Gy, nn, py, "Gy");
  shape(C, n, n, "C");
  shape(D, n, n, "D");
  require_symmetric(C, "C");
  require_symmetric(D, "D");
  for (const Matrix* op : {&Fx, &Fy, &Gx, &Gy})
    for (Eigen::Index k = 0; k < op->cols(); ++k)
      if (!is_symmetric(unvec(op->col(k), n), 1e-12))
        throw Error(ErrorKind::InvalidInput, "operator column does not map into symmetric matrices");
}

Matrix example_map(const Vector& x) {
  if (x.size() != 3) throw Error(ErrorKind::InvalidInput, "example map takes 3 coordinates");
  Matrix A(3, 3);
  A << x(0), x(2), x(1), x(2), x(1), x(0), x(1), x(0), x(2);
  return A;
}

MpsccProblem example_mpscc() {
  MpsccProblem p;
  p.n = 3;
  p.px = 3;
  p.py = 3;
  Matrix Op(9, 3);
  for (int k = 0; k < 3; ++k) Op.col(k) = vec(example_map(Vector::Unit(3, k)));
  p.Fx = Op;
  p.Fy = Matrix::Zero(9, 3);
  p.Gx = Matrix::Zero(9, 3);
  p.Gy = Op;
  p.C = Matrix::Zero(3, 3);
  p.C(0, 0) = 1.0;
  p.D = Matrix::Zero(3, 3);
  p.D(2, 2) = -1.0;
  return p;
}

MpsccProblem read_mpscc(std::istream& in) {
  std::string tok;
  MpsccProblem p;
  if (!(in >> tok) || tok != "mpscc") throw Error(ErrorKind::ParseError, "expected 'mpscc n px py'");
  if (!(in >> p.n >> p.px >> p.py)) throw Error(ErrorKind::ParseError, "expected 'mpscc n px py'");
  auto section = [&](const char* name) {
    std::string t;
    if (!(in >> t) || t != name) throw Error(ErrorKind::ParseError, std::string("expected section ") + name);
    return read_matrix(in);
  };
  p.Fx = section("Fx");
  p.Fy = section("Fy");
  p.Gx = section("Gx");
  p.Gy = section("Gy");
  p.C = section("C");
  p.D = section("D");
  p.validate();
  return p;
}

MpsccProblem load_mpscc(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
  return read_mpscc(in);
}

void write_mpscc(std::ostream& out, const MpsccProblem& p) {
  out << "mpscc " << p.n << ' ' << p.px << ' ' << p.py << '\n';
  out << "Fx\n";
  write_matrix(out, p.Fx);
  out << "Fy\n";
  write_matrix(out, p.Fy);
  out << "Gx\n";
  write_matrix(out, p.Gx);
  out << "Gy\n";
  write_matrix(out, p.Gy);
  out << "C\n";
  write_matrix(out, p.C);
  out << "D\n";
  write_matrix(out, p.D);
}

std::string to_string(ImplicationVerdict v) {
  switch (v) {
    case ImplicationVerdict::HoldsOnBranches:
      return "HoldsOnBranches";
    case ImplicationVerdict::CounterexampleFound:
      return "CounterexampleFound";
    case ImplicationVerdict::Unknown:
      return "Unknown";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// Implication check

namespace {

// Coordinates of S^n: pairs (i <= j) with basis E_ii or E_ij + E_ji.
struct SymCoords {
  int n;
  std::vector<std::pair<int, int>> pairs;

  explicit SymCoords(int n_) : n(n_) {
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) pairs.emplace_back(i, j);
  }
  int size() const { return static_cast<int>(pairs.size()); }

  // Coefficients of the functional S -> <K, S> on S^n.
  Vector functional(const Matrix& K) const {
    Vector r(size());
    for (int t = 0; t < size(); ++t) {
      auto [i, j] = pairs[t];
      r(t) = i == j ? K(i, i) : K(i, j) + K(j, i);
    }
    return r;
  }

  Matrix to_matrix(const Vector& z) const {
    Matrix S = Matrix::Zero(n, n);
    for (int t = 0; t < size(); ++t) {
      auto [i, j] = pairs[t];
      S(i, j) = z(t);
      S(j, i) = z(t);
    }
    return S;
  }
};

// Linear constraints on z = (d1, d2, Lambda, Delta).
struct System {
  int px, py;
  SymCoords sc;
  std::vector<Vector> rows;

  System(int px_, int py_, int n) : px(px_), py(py_), sc(n) {}
  int dim() const { return px + py + 2 * sc.size(); }
  int off_lambda() const { return px + py; }
  int off_delta() const { return px + py + sc.size(); }

  // a <K1, Lambda> + b <K2, Delta> = 0
  void add_pair(const Matrix& K1, double a, const Matrix& K2, double b) {
    Vector r = Vector::Zero(dim());
    if (a != 0.0) r.segment(off_lambda(), sc.size()) = a * sc.functional(K1);
    if (b != 0.0) r.segment(off_delta(), sc.size()) = b * sc.functional(K2);
    rows.push_back(r);
  }
  void add_lambda(const Matrix& K) { add_pair(K, 1.0, K, 0.0); }
  void add_delta(const Matrix& K) { add_pair(K, 0.0, K, 1.0); }

  Matrix lambda(const Vector& z) const { return sc.to_matrix(z.segment(off_lambda(), sc.size())); }
  Matrix delta(const Vector& z) const { return sc.to_matrix(z.segment(off_delta(), sc.size())); }
};

Matrix outer(const Vector& u, const Vector& v) { return u * v.transpose(); }

// Orthonormal basis of the null space of the stacked rows.
Matrix nullspace(const std::vector<Vector>& rows, int dim, double tol) {
  if (rows.empty()) return Matrix::Identity(dim, dim);
  Matrix K(rows.size(), dim);
  for (size_t i = 0; i < rows.size(); ++i) K.row(i) = rows[i].transpose();
  Eigen::JacobiSVD<Matrix> s(K, Eigen::ComputeFullV);
  const Vector& sv = s.singularValues();
  const double scale = std::max(1.0, sv.size() ? sv(0) : 0.0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol * scale) ++rank;
  return s.matrixV().rightCols(dim - rank);
}

}  // namespace

ImplicationResult implication_check(const MpsccProblem& prob, const Vector& xbar, const Vector& ybar, const Vector& w,
                                    const ImplicationOptions& opt) {
  prob.validate();
  if (xbar.size() != prob.px || ybar.size() != prob.py || w.size() != prob.px + prob.py)
    throw Error(ErrorKind::InvalidInput, "point or direction has the wrong size");
  const int n = prob.n;
  const Matrix X = prob.f(xbar, ybar), Y = prob.g(xbar, ybar);
  if (!graph_membership_psd(X, Y, 1e-9)) throw Error(ErrorKind::NotFeasible, "(f, g) is not on the graph");
  const PsdGraphPoint p = psd_graph_point(X, Y, opt.class_tol);

  const Vector w1 = w.head(prob.px), w2 = w.tail(prob.py);
  const Matrix G = unvec(prob.Fx * w1 + prob.Fy * w2, n);
  const Matrix H = unvec(prob.Gx * w1 + prob.Gy * w2, n);

  ImplicationResult res;
  res.tangent = tangent_gph_psd_report(p, G, H, 1e-8, opt.policy);
  if (!res.tangent.tangent) throw Error(ErrorKind::NotAdmissibleDirection, "mapped direction is not tangent");
  res.direction = directional_data(p, G, H);
  const DirectionalData& d = res.direction;

  const Index &a = p.sets.alpha, &b = p.sets.beta, &c = p.sets.gamma;
  if (b.size() > 2) {
    res.verdict = ImplicationVerdict::Unknown;
    res.note = "branch enumeration covers |beta| <= 2 only";
    return res;
  }

  System base(prob.px, prob.py, n);
  const int dim = base.dim();
  // d1, d2 lie in the directional normal cone of the whole space: zero.
  for (int k = 0; k < prob.px + prob.py; ++k) {
    Vector r = Vector::Zero(dim);
    r(k) = 1.0;
    base.rows.push_back(r);
  }
  if (opt.stationarity_equations) {
    // d1 + grad_x f Lambda + grad_x g Delta = 0 and the y counterpart.
    for (int k = 0; k < prob.px; ++k) {
      base.add_pair(unvec(prob.Fx.col(k), n), 1.0, unvec(prob.Gx.col(k), n), 1.0);
      base.rows.back()(k) = 1.0;
    }
    for (int k = 0; k < prob.py; ++k) {
      base.add_pair(unvec(prob.Fy.col(k), n), 1.0, unvec(prob.Gy.col(k), n), 1.0);
      base.rows.back()(prob.px + k) = 1.0;
    }
  }

  const Matrix& P = p.frame.P;
  auto pp = [&](int i, int j) { return outer(P.col(i), P.col(j)); };
  for (int i : a) {
    for (int j : a) base.add_lambda(pp(i, j));
    for (int j : b) base.add_lambda(pp(i, j));
  }
  for (int j : c) {
    for (int i : b) base.add_delta(pp(i, j));
    for (int i : c) base.add_delta(pp(i, j));
  }
  const Matrix Sag = sigma_alpha_gamma(p);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < c.size(); ++j) {
      const Matrix K = pp(a[i], c[j]);
      base.add_pair(K, Sag(i, j), K, 1.0 - Sag(i, j));
    }

  // beta-beta rows in the basis P_beta U_B (pi, delta, nu order).
  const Matrix Pb = cols(P, b) * d.UB;
  auto qq = [&](const Matrix& Q, int i, int j) { return outer(Q.col(i), Q.col(j)); };
  for (size_t ii = 0; ii < d.pi.size(); ++ii) {
    const int i = d.pi[ii];
    for (int j : d.pi) base.add_lambda(qq(Pb, i, j));
    for (int j : d.delta) base.add_lambda(qq(Pb, i, j));
    for (size_t jj = 0; jj < d.nu.size(); ++jj) {
      const double gm = d.Gamma_pinu(ii, jj);
      const Matrix K = qq(Pb, i, d.nu[jj]);
      base.add_pair(K, gm, K, 1.0 - gm);
    }
  }
  for (int j : d.nu) {
    for (int i : d.delta) base.add_delta(qq(Pb, i, j));
    for (int i : d.nu) base.add_delta(qq(Pb, i, j));
  }

  // Branches over the delta block.
  const int kd = static_cast<int>(d.delta.size());
  std::vector<std::pair<Matrix, std::string>> rotations;
  if (kd <= 1) {
    rotations.emplace_back(Matrix::Identity(kd, kd), "");
  } else {
    const int grid = 64;
    for (int refl = 0; refl < 2; ++refl)
      for (int g = 0; g < grid; ++g) {
        std::ostringstream os;
        os << " angle=" << std::setprecision(6) << g * M_PI / grid << (refl ? " refl" : "");
        rotations.emplace_back(rot2(g * M_PI / grid, refl), os.str());
      }
  }
  const std::vector<BetaPartition> parts = all_partitions(kd);
  const std::vector<double> xi_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  const Matrix Ud = cols(Pb, d.delta);
  std::mt19937_64 gen(opt.seed);

  bool undecided = false;
  for (const auto& [R, rlabel] : rotations) {
    const Matrix Qd = Ud * R;
    for (const BetaPartition& part : parts) {
      const bool has_free = !part.plus.empty() && !part.minus.empty();
      const std::vector<double> xis = has_free ? xi_grid : std::vector<double>{0.0};
      for (double xi : xis) {
        System sys = base;
        std::vector<int> lab(kd, 0);
        for (int i : part.plus) lab[i] = 1;
        for (int i : part.minus) lab[i] = -1;
        for (int i = 0; i < kd; ++i)
          for (int j = i; j < kd; ++j) {
            const Matrix K = qq(Qd, i, j);
            const int li = std::max(lab[i], lab[j]), lj = std::min(lab[i], lab[j]);
            if (li == 1 && lj == -1)
              sys.add_pair(K, xi, K, 1.0 - xi);
            else if (lj == -1)
              sys.add_delta(K);
            else if (li == 1)
              sys.add_lambda(K);
          }
        const Matrix Z = nullspace(sys.rows, dim, opt.tol);
        BranchResult br;
        br.label = (kd == 0 ? std::string("delta empty") : "delta " + part_str(part) + rlabel);
        if (has_free) br.label += " xi=" + std::to_string(xi);
        br.nullspace_dim = static_cast<int>(Z.cols());

        Vector witness;
        if (br.nullspace_dim > 0) {
          Matrix Q0(n, part.zero.size());
          for (size_t t = 0; t < part.zero.size(); ++t) Q0.col(t) = Qd.col(part.zero[t]);
          auto feasible = [&](const Vector& z) {
            const double s = 1e-9 * z.norm();
            return lmax(Q0.transpose() * sys.lambda(z) * Q0) <= s && lmin(Q0.transpose() * sys.delta(z) * Q0) >= -s;
          };
          std::vector<Vector> cands;
          for (int t = 0; t < Z.cols(); ++t) {
            cands.push_back(Z.col(t));
            cands.push_back(-Z.col(t));
          }
          if (Z.cols() >= 2 && part.zero.size() == 1) {
            // Boundary rays of the two half-space conditions inside span(z0, z1).
            const Vector z0 = Z.col(0), z1 = Z.col(1);
            const Vector q = Q0.col(0);
            const double l0 = q.dot(sys.lambda(z0) * q), l1 = q.dot(sys.lambda(z1) * q);
            const double d0 = q.dot(sys.delta(z0) * q), d1 = q.dot(sys.delta(z1) * q);
            for (const Vector& v : {Vector(l1 * z0 - l0 * z1), Vector(d1 * z0 - d0 * z1)})
              if (v.norm() > 1e-12) {
                cands.push_back(v / v.norm());
                cands.push_back(-v / v.norm());
              }
          }
          for (const Vector& z : cands)
            if (feasible(z)) {
              witness = z;
              break;
            }
          if (witness.size() == 0 && part.zero.size() >= 2) {
            std::normal_distribution<double> nd;
            for (int t = 0; t < opt.budget && witness.size() == 0; ++t) {
              Vector coef(Z.cols());
              for (int s = 0; s < coef.size(); ++s) coef(s) = nd(gen);
              const Vector z = Z * coef;
              if (feasible(z)) witness = z / z.norm();
            }
            if (witness.size() == 0) br.decided = false;
          }
        }
        br.sign_feasible = witness.size() > 0;
        res.branches.push_back(br);
        if (br.sign_feasible) {
          res.verdict = ImplicationVerdict::CounterexampleFound;
          res.d1 = witness.head(prob.px);
          res.d2 = witness.segment(prob.px, prob.py);
          res.Lambda = sys.lambda(witness);
          res.Delta = sys.delta(witness);
          for (int t = 0; t < Z.cols(); ++t) res.null_basis.emplace_back(sys.lambda(Z.col(t)), sys.delta(Z.col(t)));
          res.note = "nonzero solution on branch " + br.label;
          return res;
        }
        if (!br.decided) undecided = true;
      }
    }
  }
  res.verdict = undecided ? ImplicationVerdict::Unknown : ImplicationVerdict::HoldsOnBranches;
  if (kd >= 2) res.note = "branch-limited: delta rotations sampled on a grid";
  return res;
}

void write_implication(std::ostream& out, const ImplicationResult& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "verdict " << to_string(r.verdict) << '\n';
  os << "tangent " << (r.tangent.tangent ? "yes" : "no") << " threshold " << r.tangent.threshold << '\n';
  for (const auto& e : r.tangent.residuals) os << "tangent-residual " << e.block << ' ' << e.value << '\n';
  if (r.direction.B.size() > 0) {
    os << "B-eigenvalues";
    for (int i = 0; i < r.direction.lambdaB.size(); ++i) os << ' ' << r.direction.lambdaB(i);
    os << '\n';
    os << "pi {" << index_str(r.direction.pi) << "} delta {" << index_str(r.direction.delta) << "} nu {"
       << index_str(r.direction.nu) << "}\n";
  }
  for (const auto& b : r.branches)
    os << "branch " << b.label << " nullspace " << b.nullspace_dim << (b.sign_feasible ? " counterexample" : "")
       << (b.decided ? "" : " undecided") << '\n';
  if (r.verdict == ImplicationVerdict::CounterexampleFound) {
    os << "Lambda\n";
    write_matrix(os, r.Lambda);
    os << "Delta\n";
    write_matrix(os, r.Delta);
  }
  if (!r.note.empty()) os << "note " << r.note << '\n';
  out << os.str();
}

}  // namespace rankstat
