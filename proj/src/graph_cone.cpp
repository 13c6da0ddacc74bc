#include "rankstat/graph_cone.hpp"

#include "rankstat/nuclear.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

namespace rankstat {

namespace {

constexpr double kBig = 1e300;

enum class Cls { A, B, G };

std::vector<Cls> labels(const IndexSets& s) {
  std::vector<Cls> lab(s.m, Cls::G);
  for (int i : s.alpha) lab[i] = Cls::A;
  for (int i : s.beta) lab[i] = Cls::B;
  return lab;
}

enum class Part { P, Z, M };

std::vector<Part> part_labels(int k, const BetaPartition& p) {
  std::vector<int> seen(k, 0);
  std::vector<Part> lab(k, Part::Z);
  auto mark = [&](const Index& idx, Part c) {
    for (int i : idx) {
      if (i < 0 || i >= k || seen[i]++) throw Error(ErrorKind::InvalidInput, "not a partition of beta");
      lab[i] = c;
    }
  };
  mark(p.plus, Part::P);
  mark(p.zero, Part::Z);
  mark(p.minus, Part::M);
  for (int i = 0; i < k; ++i)
    if (!seen[i]) throw Error(ErrorKind::InvalidInput, "not a partition of beta");
  return lab;
}

double lambda_max_sym(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(A), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double lambda_min_sym(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(A), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Matrix haar_orthogonal(std::mt19937_64& g, int k) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix A(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) A(i, j) = d(g);
  Eigen::HouseholderQR<Matrix> qr(A);
  Matrix Q = qr.householderQ();
  Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < k; ++i)
    if (R(i, i) < 0) Q.col(i) *= -1.0;
  return Q;
}

Matrix rot2(double th, bool reflect) {
  Matrix Q(2, 2);
  const double c = std::cos(th), s = std::sin(th);
  Q << c, -s, s, c;
  if (reflect) Q.col(1) *= -1.0;
  return Q;
}

Matrix sym_eigvecs(const Matrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(A));
  return es.eigenvectors();
}

}  // namespace

OmegaMatrices build_omega(const Vector& s, int n, double tie_tol) {
  const int m = static_cast<int>(s.size());
  if (n < m) throw Error(ErrorKind::InvalidInput, "n must be at least m");
  OmegaMatrices om;
  om.Omega1 = Matrix::Zero(m, m);
  om.Omega2 = Matrix::Zero(m, m);
  om.Omega3 = Matrix::Zero(m, n - m);
  auto h = [](double x) { return std::min(1.0, x); };
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (std::abs(s(i) - s(j)) > tie_tol) om.Omega1(i, j) = (h(s(i)) - h(s(j))) / (s(i) - s(j));
      if (s(i) + s(j) > tie_tol) om.Omega2(i, j) = (h(s(i)) + h(s(j))) / (s(i) + s(j));
    }
    if (s(i) > tie_tol)
      for (int j = 0; j < n - m; ++j) om.Omega3(i, j) = h(s(i)) / s(i);
  }
  return om;
}

ThetaSigma build_theta_sigma(const OmegaMatrices& om, const IndexSets& sets) {
  const int m = sets.m;
  ThetaSigma ts;
  ts.Theta1 = Matrix::Zero(m, m);
  ts.Theta2 = Matrix::Zero(m, m);
  ts.Sigma1 = Matrix::Zero(m, m);
  ts.Sigma2 = Matrix::Zero(m, m);
  std::vector<Cls> lab = labels(sets);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const Cls a = lab[i], b = lab[j];
      const double o1 = om.Omega1(i, j), o2 = om.Omega2(i, j);
      if (a == Cls::A) {
        ts.Theta1(i, j) = b == Cls::G ? o1 : 0.0;
        ts.Theta2(i, j) = b == Cls::G ? 1.0 - o1 : 1.0;
        ts.Sigma1(i, j) = o2;
        ts.Sigma2(i, j) = 1.0 - o2;
      } else if (a == Cls::B) {
        ts.Theta1(i, j) = b == Cls::G ? 1.0 : 0.0;
        ts.Theta2(i, j) = b == Cls::A ? 1.0 : 0.0;
        ts.Sigma1(i, j) = b == Cls::A ? o2 : b == Cls::G ? 1.0 : 0.0;
        ts.Sigma2(i, j) = b == Cls::A ? 1.0 - o2 : 0.0;
      } else {
        ts.Theta1(i, j) = b == Cls::A ? o1 : 1.0;
        ts.Theta2(i, j) = b == Cls::A ? 1.0 - o1 : 0.0;
        ts.Sigma1(i, j) = b == Cls::A ? o2 : 1.0;
        ts.Sigma2(i, j) = b == Cls::A ? 1.0 - o2 : 0.0;
      }
    }
  }
  return ts;
}

Matrix divided_difference_min1(const Vector& z, double tie_tol) {
  const int k = static_cast<int>(z.size());
  for (int i = 0; i < k; ++i) {
    if (!(z(i) > 0)) throw Error(ErrorKind::InvalidInput, "divided difference needs positive z");
    if (i > 0 && z(i) > z(i - 1) + tie_tol) throw Error(ErrorKind::InvalidInput, "z must be nonincreasing");
  }
  Matrix D(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (std::abs(z(i) - z(j)) > tie_tol)
        D(i, j) = (std::min(1.0, z(i)) - std::min(1.0, z(j))) / (z(i) - z(j));
      else
        D(i, j) = z(i) >= 1.0 ? 0.0 : 1.0;
    }
  return D;
}

PartitionXi enumerate_xi(int k, const BetaPartition& part, const Matrix& pm) {
  std::vector<Part> lab = part_labels(k, part);
  if (pm.rows() != static_cast<Eigen::Index>(part.plus.size()) ||
      pm.cols() != static_cast<Eigen::Index>(part.minus.size()))
    throw Error(ErrorKind::InvalidInput, "Xi1 block has the wrong shape");
  if (pm.size() > 0 && (pm.minCoeff() < 0.0 || pm.maxCoeff() > 1.0))
    throw Error(ErrorKind::InvalidInput, "Xi1 entries must lie in [0,1]");
  std::vector<int> pos(k, -1);
  for (size_t a = 0; a < part.plus.size(); ++a) pos[part.plus[a]] = static_cast<int>(a);
  for (size_t a = 0; a < part.minus.size(); ++a) pos[part.minus[a]] = static_cast<int>(a);

  PartitionXi x;
  x.part = part;
  x.Xi1_pm = pm;
  x.Xi1 = Matrix::Zero(k, k);
  x.Xi2 = Matrix::Zero(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const Part a = lab[i], b = lab[j];
      if (a == Part::P && b == Part::M) {
        x.Xi1(i, j) = pm(pos[i], pos[j]);
        x.Xi2(i, j) = 1.0 - pm(pos[i], pos[j]);
      } else if (a == Part::M && b == Part::P) {
        x.Xi1(i, j) = pm(pos[j], pos[i]);
        x.Xi2(i, j) = 1.0 - pm(pos[j], pos[i]);
      } else if (a == Part::M || b == Part::M) {
        // (0,-), (-,0), (-,-)
        x.Xi1(i, j) = 1.0;
      } else if (!(a == Part::Z && b == Part::Z)) {
        // (+,+), (+,0), (0,+)
        x.Xi2(i, j) = 1.0;
      }
    }
  return x;
}

std::vector<BetaPartition> all_partitions(int k) {
  std::vector<BetaPartition> out;
  int total = 1;
  for (int i = 0; i < k; ++i) total *= 3;
  for (int code = 0; code < total; ++code) {
    BetaPartition p;
    int c = code;
    for (int i = 0; i < k; ++i, c /= 3) {
      if (c % 3 == 0)
        p.plus.push_back(i);
      else if (c % 3 == 1)
        p.zero.push_back(i);
      else
        p.minus.push_back(i);
    }
    out.push_back(std::move(p));
  }
  return out;
}

GraphFrame graph_frame(const Matrix& X, const Matrix& W, double class_tol) {
  const Matrix Z = X + W;
  if (class_tol <= 0) class_tol = default_class_tol(Z);
  GraphFrame g;
  g.frame = svd(Z, class_tol);
  g.sets = classify_singular_values(g.frame.sigma, class_tol, static_cast<int>(Z.cols()));
  g.sigma_snapped = g.frame.sigma;
  for (int i : g.sets.beta) g.sigma_snapped(i) = 1.0;
  for (int i : g.sets.gamma0) g.sigma_snapped(i) = 0.0;
  return g;
}

double ConeMembershipCertificate::residual(const std::string& block) const {
  for (const auto& r : residuals)
    if (r.block == block) return r.value;
  return 0.0;
}

BetaFit fit_beta_block(const Matrix& M, const Matrix& N, const Matrix& Q, const BetaPartition& part) {
  const int k = static_cast<int>(M.rows());
  std::vector<Part> lab = part_labels(k, part);
  const Matrix Mh = Q.transpose() * M * Q;
  const Matrix Nh = Q.transpose() * N * Q;
  const Matrix B = sym(Mh) + skew(Nh);

  std::vector<int> pos(k, -1);
  for (size_t a = 0; a < part.plus.size(); ++a) pos[part.plus[a]] = static_cast<int>(a);
  for (size_t a = 0; a < part.minus.size(); ++a) pos[part.minus[a]] = static_cast<int>(a);
  Matrix pm = Matrix::Zero(part.plus.size(), part.minus.size());

  double sq = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const Part a = lab[i], b = lab[j];
      if (a == Part::P && b == Part::M) {
        const double a1 = Nh(i, j), b1 = B(i, j), a2 = Nh(j, i), b2 = B(j, i);
        const double d1 = a1 - b1, d2 = a2 - b2;
        const double den = d1 * d1 + d2 * d2;
        double xi = 0.5;
        if (den > 1e-300) xi = std::clamp(-(d1 * b1 + d2 * b2) / den, 0.0, 1.0);
        const double r1 = b1 + xi * d1, r2 = b2 + xi * d2;
        sq += r1 * r1 + r2 * r2;
        pm(pos[i], pos[j]) = xi;
      } else if (a == Part::M && b == Part::P) {
        // handled together with its transpose
      } else if (a == Part::M || b == Part::M) {
        sq += Nh(i, j) * Nh(i, j);
      } else if (!(a == Part::Z && b == Part::Z)) {
        sq += B(i, j) * B(i, j);
      }
    }

  BetaFit fit;
  fit.equation_residual = std::sqrt(sq);
  if (!part.zero.empty()) {
    Matrix Q0(k, part.zero.size());
    for (size_t a = 0; a < part.zero.size(); ++a) Q0.col(a) = Q.col(part.zero[a]);
    const double up = lambda_max_sym(Q0.transpose() * M * Q0);
    const double lo = lambda_min_sym(Q0.transpose() * N * Q0);
    fit.sign_violation = std::max(0.0, up) + std::max(0.0, -lo);
  }
  fit.xi = enumerate_xi(k, part, pm);
  return fit;
}

BetaSearchResult search_beta_block(const Matrix& M, const Matrix& N, double thr, const SearchOptions& opt) {
  const int k = static_cast<int>(M.rows());
  BetaSearchResult res;
  res.best_cost = kBig;
  if (k == 0) {
    res.found = true;
    res.exhaustive = true;
    res.best_cost = 0.0;
    return res;
  }
  const std::vector<BetaPartition> parts = all_partitions(k);

  auto try_q = [&](const Matrix& Q) -> bool {
    for (const auto& p : parts) {
      BetaFit f = fit_beta_block(M, N, Q, p);
      const double cost = f.equation_residual + f.sign_violation;
      if (cost < res.best_cost) {
        res.best_cost = cost;
        res.Q = Q;
        res.fit = f;
      }
      if (f.equation_residual <= thr && f.sign_violation <= thr) {
        res.found = true;
        res.Q = Q;
        res.fit = f;
        return true;
      }
    }
    return false;
  };

  if (k == 1) {
    res.exhaustive = true;
    try_q(Matrix::Identity(1, 1));
    return res;
  }

  std::vector<Matrix> structured{Matrix::Identity(k, k), sym_eigvecs(M), sym_eigvecs(N), sym_eigvecs(M + N),
                                 sym_eigvecs(M - N)};
  for (const Matrix& Q : structured)
    if (try_q(Q)) return res;

  if (k == 2) {
    const int grid = 1024;
    const double h = 2.0 * M_PI / grid;
    for (size_t pi = 0; pi < parts.size(); ++pi) {
      for (int refl = 0; refl < 2; ++refl) {
        auto cost = [&](double th) {
          BetaFit f = fit_beta_block(M, N, rot2(th, refl), parts[pi]);
          return f.equation_residual + f.sign_violation;
        };
        double best_th = 0.0, best = kBig;
        for (int g = 0; g < grid; ++g) {
          const double th = g * h;
          const double c = cost(th);
          if (c < best) {
            best = c;
            best_th = th;
          }
        }
        // Golden-section refinement around the best grid angle.
        double a = best_th - h, b = best_th + h;
        const double r = 0.6180339887498949;
        double c1 = b - r * (b - a), c2 = a + r * (b - a);
        double f1 = cost(c1), f2 = cost(c2);
        for (int it = 0; it < 80; ++it) {
          if (f1 <= f2) {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - r * (b - a);
            f1 = cost(c1);
          } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + r * (b - a);
            f2 = cost(c2);
          }
        }
        for (double th : {best_th, 0.5 * (a + b)}) {
          BetaFit f = fit_beta_block(M, N, rot2(th, refl), parts[pi]);
          const double c = f.equation_residual + f.sign_violation;
          if (c < res.best_cost) {
            res.best_cost = c;
            res.Q = rot2(th, refl);
            res.fit = f;
          }
          if (f.equation_residual <= thr && f.sign_violation <= thr) {
            res.found = true;
            res.Q = rot2(th, refl);
            res.fit = f;
            return res;
          }
        }
      }
    }
    return res;
  }

  std::mt19937_64 gen(opt.seed);
  for (int b = 0; b < opt.budget; ++b)
    if (try_q(haar_orthogonal(gen, k))) return res;
  return res;
}

ConeMembershipCertificate normal_cone_membership(const Matrix& X, const Matrix& W, const Matrix& G, const Matrix& H,
                                                 const SearchOptions& opt) {
  const int m = static_cast<int>(X.rows());
  const int n = static_cast<int>(X.cols());
  if (W.rows() != m || W.cols() != n || G.rows() != m || G.cols() != n || H.rows() != m || H.cols() != n)
    throw Error(ErrorKind::InvalidInput, "shape mismatch");
  if (m > n) throw Error(ErrorKind::InvalidInput, "expects m <= n");
  if (!nuclear_membership(X, W, std::max(opt.tol, 1e-9)).member)
    throw Error(ErrorKind::NotOnGraph, "(X, W) is not on the graph of the nuclear norm subdifferential");

  const GraphFrame gf = graph_frame(X, W, opt.class_tol);
  const IndexSets& s = gf.sets;
  const Matrix& U = gf.frame.U;
  const Matrix& V = gf.frame.V;
  const Matrix Gt = U.transpose() * G * V;
  const Matrix Ht = U.transpose() * H * V;
  const Matrix G1 = Gt.leftCols(m), H1 = Ht.leftCols(m);

  const OmegaMatrices om = build_omega(gf.sigma_snapped, n, s.class_tol);
  const ThetaSigma ts = build_theta_sigma(om, s);

  ConeMembershipCertificate cert;
  cert.threshold = opt.tol * std::max(1.0, G.norm() + H.norm());

  const Matrix R1 = ts.Theta1.cwiseProduct(sym(H1)) + ts.Theta2.cwiseProduct(sym(G1)) +
                    ts.Sigma1.cwiseProduct(skew(H1)) + ts.Sigma2.cwiseProduct(skew(G1));
  const Index gam = s.gamma();
  const Matrix Gac = block(Gt, s.alpha, s.c), Hac = block(Ht, s.alpha, s.c);
  const Matrix O3 = block(om.Omega3, s.alpha, range(0, n - m));
  const Matrix R2a = Gac + O3.cwiseProduct(Hac - Gac);
  cert.residuals.push_back({"square-block", R1.norm()});
  cert.residuals.push_back({"alpha-c", R2a.norm()});
  cert.residuals.push_back({"beta-c", block(Ht, s.beta, s.c).norm()});
  cert.residuals.push_back({"gamma-c", block(Ht, gam, s.c).norm()});

  for (const auto& r : cert.residuals)
    if (r.value > cert.threshold) {
      cert.verdict = Verdict::Refuted;
      cert.note = "search-free condition " + r.block + " fails";
      return cert;
    }

  const Matrix Mbb = block(Gt, s.beta, s.beta);
  const Matrix Nbb = block(Ht, s.beta, s.beta);
  BetaSearchResult sr = search_beta_block(Mbb, Nbb, cert.threshold, opt);
  cert.residuals.push_back({"beta-beta", s.beta.empty() ? 0.0 : sr.best_cost});
  if (sr.found) {
    cert.verdict = Verdict::Verified;
    if (!s.beta.empty()) cert.witness = ConeWitness{sr.Q, sr.fit.xi};
    return cert;
  }
  if (sr.exhaustive) {
    cert.verdict = Verdict::Refuted;
    cert.note = "beta block condition fails for every partition (exhaustive for |beta| = 1)";
  } else {
    cert.verdict = Verdict::Unknown;
    cert.note = "no (Q, partition, Xi) found within the search budget";
  }
  return cert;
}

ConeMembershipCertificate coderivative_contains(const Matrix& X, const Matrix& W, const Matrix& v, const Matrix& u,
                                                const SearchOptions& opt) {
  return normal_cone_membership(X, W, u, -v, opt);
}

void write_certificate(std::ostream& out, const ConeMembershipCertificate& c) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "verdict " << to_string(c.verdict) << '\n';
  os << "threshold " << c.threshold << '\n';
  for (const auto& r : c.residuals) os << "residual " << r.block << ' ' << r.value << '\n';
  if (!c.note.empty()) os << "note " << c.note << '\n';
  if (c.witness) {
    const auto& w = *c.witness;
    auto list = [&os](const char* name, const Index& idx) {
      os << name;
      for (int i : idx) os << ' ' << i + 1;
      os << '\n';
    };
    list("beta_plus", w.xi.part.plus);
    list("beta_zero", w.xi.part.zero);
    list("beta_minus", w.xi.part.minus);
    os << "Q\n";
    write_matrix(os, w.Q);
    os << "Xi1\n";
    write_matrix(os, w.xi.Xi1);
  }
  out << os.str();
}

}  // namespace rankstat
