#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cone_agreement.hpp"
#include "graph_oracle.hpp"
#include "rankstat/graph_cone.hpp"
#include "rankstat/nuclear.hpp"
#include "test_util.hpp"

using namespace rankstat;
using namespace testutil;

namespace {

Matrix pad(const Matrix& A, int n) {
  Matrix B = Matrix::Zero(A.rows(), n);
  B.leftCols(A.cols()) = A;
  return B;
}

Matrix diag(std::initializer_list<double> v) {
  Vector d(v.size());
  int i = 0;
  for (double x : v) d(i++) = x;
  return d.asDiagonal();
}

// Graph point with prescribed singular values of Zbar = X + W.
std::pair<Matrix, Matrix> graph_point(std::mt19937_64& g, const Vector& sz, int n) {
  Matrix Z = with_singular_values(g, sz, n);
  Matrix X = graph_oracle::prox1(Z);
  return {X, Z - X};
}

// A beta-block pair satisfying the condition for partition ({0},{},{1}) with
// Xi1 entry xi, expressed in a rotated basis Q.
std::pair<Matrix, Matrix> beta_pair(std::mt19937_64& g, double xi, const Matrix& Q) {
  const double a = uniform(g, -1, 1), k = uniform(g, -1, 1);
  const double s = -xi * a / (1.0 - xi);
  Matrix Mh(2, 2), Nh(2, 2);
  Mh << 0.0, s + k, s - k, uniform(g, -1, 1);
  Nh << uniform(g, -1, 1), a, a, 0.0;
  return {Q * Mh * Q.transpose(), Q * Nh * Q.transpose()};
}

}  // namespace

TEST_CASE("build_omega entries") {
  Vector s(2);
  s << 3.0, 0.5;
  OmegaMatrices a = build_omega(s, 2);
  CHECK(a.Omega1(0, 1) == doctest::Approx(0.2));
  CHECK(a.Omega1(1, 0) == doctest::Approx(0.2));
  CHECK(a.Omega2(0, 1) == doctest::Approx(1.5 / 3.5));

  s << 1.0, 1.0;
  CHECK(build_omega(s, 2).Omega1.norm() == 0.0);

  s << 2.0, 0.0;
  OmegaMatrices c = build_omega(s, 3);
  CHECK(c.Omega3.rows() == 2);
  CHECK(c.Omega3.cols() == 1);
  CHECK(c.Omega3(0, 0) == doctest::Approx(0.5));
  CHECK(c.Omega3(1, 0) == 0.0);
  CHECK(c.Omega2(1, 1) == 0.0);
}

TEST_CASE("Omega1 entries lie in [0,1] and Theta/Sigma blocks complement") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 100; ++trial) {
    Vector s(5);
    for (int i = 0; i < 5; ++i) {
      double p = uniform(gen, 0, 1);
      s(i) = p < 0.2 ? 1.0 : p < 0.3 ? 0.0 : uniform(gen, 0.0, 3.0);
    }
    std::sort(s.data(), s.data() + 5, std::greater<double>());
    IndexSets sets = classify_singular_values(s, 1e-12, 6);
    OmegaMatrices om = build_omega(s, 6);
    CHECK(om.Omega1.minCoeff() >= 0.0);
    CHECK(om.Omega1.maxCoeff() <= 1.0);
    ThetaSigma ts = build_theta_sigma(om, sets);
    // Outside the beta-beta block the pairs add up to the all-ones pattern.
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        const bool bb = std::find(sets.beta.begin(), sets.beta.end(), i) != sets.beta.end() &&
                        std::find(sets.beta.begin(), sets.beta.end(), j) != sets.beta.end();
        const double t = ts.Theta1(i, j) + ts.Theta2(i, j);
        const double sg = ts.Sigma1(i, j) + ts.Sigma2(i, j);
        CHECK(t == doctest::Approx(bb ? 0.0 : 1.0));
        CHECK(sg == doctest::Approx(bb ? 0.0 : 1.0));
      }
  }
}

TEST_CASE("Theta and Sigma block layout") {
  Vector s(3);
  s << 3.0, 1.0, 0.5;
  IndexSets sets = classify_singular_values(s, 1e-12, 3);
  OmegaMatrices om = build_omega(s, 3);
  ThetaSigma ts = build_theta_sigma(om, sets);
  Matrix T1(3, 3), T2(3, 3), S1(3, 3), S2(3, 3);
  const double o = 0.2, w = om.Omega2(0, 1), v = om.Omega2(0, 2), u = om.Omega2(0, 0);
  T1 << 0, 0, o, 0, 0, 1, o, 1, 1;
  T2 << 1, 1, 1 - o, 1, 0, 0, 1 - o, 0, 0;
  S1 << u, w, v, w, 0, 1, v, 1, 1;
  S2 << 1 - u, 1 - w, 1 - v, 1 - w, 0, 0, 1 - v, 0, 0;
  CHECK((ts.Theta1 - T1).norm() <= 1e-15);
  CHECK((ts.Theta2 - T2).norm() <= 1e-15);
  CHECK((ts.Sigma1 - S1).norm() <= 1e-15);
  CHECK((ts.Sigma2 - S2).norm() <= 1e-15);
}

TEST_CASE("divided_difference_min1") {
  Vector z(2);
  z << 2.0, 2.0;
  CHECK(divided_difference_min1(z).norm() == 0.0);
  z << 0.5, 0.5;
  CHECK((divided_difference_min1(z) - Matrix::Ones(2, 2)).norm() == 0.0);
  z << 2.0, 0.5;
  Matrix D = divided_difference_min1(z);
  CHECK(D(0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(D(1, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(D(0, 0) == 0.0);
  CHECK(D(1, 1) == 1.0);
  z << 1.0, 0.0;
  CHECK_THROWS_AS(divided_difference_min1(z), Error);
}

TEST_CASE("enumerate_xi layouts") {
  PartitionXi a = enumerate_xi(1, {{0}, {}, {}}, Matrix::Zero(1, 0));
  CHECK(a.Xi1(0, 0) == 0.0);
  CHECK(a.Xi2(0, 0) == 1.0);
  PartitionXi b = enumerate_xi(1, {{}, {}, {0}}, Matrix::Zero(0, 1));
  CHECK(b.Xi1(0, 0) == 1.0);
  CHECK(b.Xi2(0, 0) == 0.0);
  Matrix pm(1, 1);
  pm << 0.3;
  PartitionXi c = enumerate_xi(2, {{0}, {}, {1}}, pm);
  Matrix X1(2, 2), X2(2, 2);
  X1 << 0, 0.3, 0.3, 1;
  X2 << 1, 0.7, 0.7, 0;
  CHECK((c.Xi1 - X1).norm() <= 1e-15);
  CHECK((c.Xi2 - X2).norm() <= 1e-15);
  pm << 1.5;
  CHECK_THROWS_AS(enumerate_xi(2, {{0}, {}, {1}}, pm), Error);
  CHECK_THROWS_AS(enumerate_xi(2, {{0}, {}, {0}}, Matrix::Zero(1, 1)), Error);
}

TEST_CASE("divided-difference limits have the partition layout") {
  // z^k -> (1,1,1,1) with two entries above 1, one at 1 and one below.
  for (double t : {1e-2, 1e-4, 1e-6}) {
    Vector z(4);
    z << 1 + 2 * t, 1 + t, 1.0, 1 - 3 * t;
    Matrix D = divided_difference_min1(z);
    Matrix pm(2, 1);
    pm << 0.6, 0.75;
    PartitionXi x = enumerate_xi(4, {{0, 1}, {2}, {3}}, pm);
    Index keep{0, 1, 3};
    CHECK((block(D, keep, keep) - block(x.Xi1, keep, keep)).norm() <= 1e-9);
  }
}

TEST_CASE("zero direction is always in the cone") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 30; ++trial) {
    Vector s(2);
    s << uniform(gen, 0, 3), 1.0;
    std::sort(s.data(), s.data() + 2, std::greater<double>());
    auto [X, W] = graph_point(gen, s, 3);
    auto c = normal_cone_membership(X, W, Matrix::Zero(2, 3), Matrix::Zero(2, 3));
    CHECK(c.verdict == Verdict::Verified);
  }
}

TEST_CASE("search-free refutation on the gamma-c block") {
  Matrix X = pad(diag({2, 0}), 3), W = pad(diag({1, 0.5}), 3);
  Matrix G = Matrix::Zero(2, 3), H = Matrix::Zero(2, 3);
  H(1, 2) = 1.0;
  auto c = normal_cone_membership(X, W, G, H);
  CHECK(c.verdict == Verdict::Refuted);
  CHECK(c.residual("gamma-c") == doctest::Approx(1.0));
}

TEST_CASE("off-graph input is rejected") {
  CHECK_THROWS_AS(normal_cone_membership(diag({2, 0}), diag({0.5, 0}), Matrix::Zero(2, 2), Matrix::Zero(2, 2)),
                  Error);
}

TEST_CASE("residuals are linear and Verified is a cone property") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 50; ++trial) {
    Vector s(3);
    s << 2.5, 1.0, 0.4;
    auto [X, W] = graph_point(gen, s, 4);
    Matrix G = randn(gen, 3, 4), H = randn(gen, 3, 4);
    auto c1 = normal_cone_membership(X, W, G, H);
    auto c2 = normal_cone_membership(X, W, 2 * G, 2 * H);
    for (const char* b : {"square-block", "alpha-c", "beta-c", "gamma-c"})
      CHECK(c2.residual(b) == doctest::Approx(2 * c1.residual(b)).epsilon(1e-9));
  }
  Vector s(2);
  s << 2.0, 0.5;
  auto [X, W] = graph_point(gen, s, 2);
  for (int trial = 0; trial < 20; ++trial) {
    auto [G, H] = graph_oracle::sample_normal(X + W, gen, 1e-6);
    SearchOptions o;
    o.tol = 1e-4;
    auto c = normal_cone_membership(X, W, G, H, o);
    CHECK(c.verdict == Verdict::Verified);
    for (double k : {0.5, 3.0, 40.0}) CHECK(normal_cone_membership(X, W, k * G, k * H, o).verdict == Verdict::Verified);
  }
}

TEST_CASE("beta empty never yields Unknown") {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 100; ++trial) {
    Vector s(3);
    s << uniform(gen, 1.5, 3), uniform(gen, 0.2, 0.9), 0.0;
    auto [X, W] = graph_point(gen, s, 4);
    auto c = normal_cone_membership(X, W, randn(gen, 3, 4), randn(gen, 3, 4));
    CHECK(c.verdict != Verdict::Unknown);
  }
}

TEST_CASE("beta search recovers planted witnesses for |beta| = 2") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 20; ++trial) {
    const double xi = uniform(gen, 0.05, 0.95);
    Matrix Q = rand_orthogonal(gen, 2);
    auto [M, N] = beta_pair(gen, xi, Q);
    SearchOptions o;
    BetaSearchResult r = search_beta_block(M, N, 1e-8 * (1 + M.norm() + N.norm()), o);
    CHECK(r.found);
  }
}

TEST_CASE("beta search for |beta| = 3 uses budgeted sampling") {
  std::mt19937_64 gen(13);
  // Planted at Q = I with partition ({0},{1},{2}).
  Matrix Mh = Matrix::Zero(3, 3), Nh = Matrix::Zero(3, 3);
  Mh(1, 1) = -1.0;
  Nh(1, 1) = 2.0;
  Nh(0, 0) = 0.7;
  SearchOptions o;
  o.budget = 50;
  BetaSearchResult r = search_beta_block(Mh, Nh, 1e-8, o);
  CHECK(r.found);
  CHECK_FALSE(r.exhaustive);

  // A generic pair: never reported as conclusively refuted.
  BetaSearchResult g = search_beta_block(randn(gen, 3, 3), randn(gen, 3, 3), 1e-8, o);
  CHECK_FALSE(g.exhaustive);
}

TEST_CASE("|beta| = 1 search is exact") {
  Matrix M(1, 1), N(1, 1);
  M << -1.0;
  N << 2.0;
  SearchOptions o;
  CHECK(search_beta_block(M, N, 1e-10, o).found);  // beta_0
  M << 0.0;
  CHECK(search_beta_block(M, N, 1e-10, o).found);  // beta_+
  M << 1.0;
  N << 0.0;
  CHECK(search_beta_block(M, N, 1e-10, o).found);  // beta_-
  N << 1.0;
  BetaSearchResult r = search_beta_block(M, N, 1e-10, o);
  CHECK_FALSE(r.found);
  CHECK(r.exhaustive);
}

TEST_CASE("coderivative at the origin is the whole space") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = coderivative_contains(Matrix::Zero(2, 3), Matrix::Zero(2, 3), Matrix::Zero(2, 3), randn(gen, 2, 3));
    CHECK(c.verdict == Verdict::Verified);
  }
  CHECK(coderivative_contains(diag({2, 0}), diag({1, 0.2}), Matrix::Zero(2, 2), Matrix::Zero(2, 2)).verdict ==
        Verdict::Verified);
}

TEST_CASE("sampled regular normals near the point are accepted") {
  std::mt19937_64 gen(19);
  for (int trial = 0; trial < 60; ++trial) {
    Vector s(2);
    const int kind = trial % 4;
    if (kind == 0) s << 2.0, 1.0;
    if (kind == 1) s << 1.0, 0.3;
    if (kind == 2) s << 1.7, 0.0;
    if (kind == 3) s << 1.0, 0.0;
    auto [X, W] = graph_point(gen, s, 3);
    auto [G, H] = graph_oracle::sample_normal(X + W, gen, 1e-6);
    SearchOptions o;
    o.tol = 1e-4;
    auto c = normal_cone_membership(X, W, G, H, o);
    CHECK(c.verdict == Verdict::Verified);
  }
}

TEST_CASE("agreement with the sampling oracle on 2x2 queries") {
  AgreementStats st = run_cone_agreement(2024, 200);
  CHECK(st.queries() == 200);
  CHECK(st.contradictions == 0);
  CHECK(st.unknown <= 40);
  CHECK(st.verified > 50);
  CHECK(st.refuted > 30);
}
