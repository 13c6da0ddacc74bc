#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rankstat/penalty.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace rankstat;
using namespace testutil;

TEST_CASE("quadratic conjugate at the three branches") {
  PsiSpec psi(quadratic_phi(3.0));
  CHECK(psi_conjugate(psi, 0.25) == 0.0);
  CHECK(psi_conjugate(psi, 1.0) == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(psi_conjugate(psi, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(psi_conjugate(psi, -2.0) == 0.0);
  CHECK(psi.hat_conj(-2.0) == doctest::Approx(1.0));

  auto phi = [](double t) { return 0.5 * t * t + 0.5 * t; };
  for (double s : {0.25, 1.0, 2.0}) {
    auto [v, t] = ternary_conjugate(phi, s);
    CHECK(std::abs(psi_conjugate(psi, s) - v) <= 1e-10);
    CHECK(std::abs(psi.conj_deriv(s) - t) <= 1e-6);
  }
}

TEST_CASE("quadratic closed form agrees with the generic golden-section path") {
  for (double a : {1.5, 2.0, 3.0, 10.0}) {
    PhiSpec phi = quadratic_phi(a);
    PsiSpec psi(phi);
    for (int k = 0; k <= 600; ++k) {
      const double s = -3.0 + 6.0 * k / 600.0;
      const double oracle = golden_section_conjugate(phi.eval, s).value;
      CHECK(std::abs(psi_conjugate(psi, s) - oracle) <= 1e-8);
    }
  }
}

TEST_CASE("generic conjugate agrees with a test-side ternary oracle") {
  PsiSpec sq(square_phi());
  for (int k = 0; k <= 60; ++k) {
    const double s = -3.0 + 6.0 * k / 60.0;
    auto [v, t] = ternary_conjugate([](double x) { return x * x; }, s);
    CHECK(std::abs(sq.conj(s) - v) <= 1e-10);
    CHECK(std::abs(sq.conj_deriv(s) - t) <= 1e-6);
  }
  PsiSpec tab(tabulated_phi({0.0, 0.5, 1.0}, {0.0, 0.25, 1.0}));
  for (int k = 0; k <= 60; ++k) {
    const double s = -3.0 + 6.0 * k / 60.0;
    auto f = [](double x) { return x <= 0.5 ? 0.5 * x : 0.25 + 1.5 * (x - 0.5); };
    CHECK(std::abs(tab.conj(s) - ternary_conjugate(f, s).first) <= 1e-10);
  }
}

TEST_CASE("validate_phi on the built-in generators") {
  for (const PhiSpec& phi : {quadratic_phi(3.0), linear_phi(), square_phi()}) {
    ValidationReport r = validate_phi(phi);
    CHECK(r.all_passed());
    CHECK(r.t_star == 0.0);
    CHECK(r.in_L1);
    CHECK(r.in_L2);
  }
  PhiSpec bad = make_phi("twice", [](double t) { return 2 * t; }, [](double) { return 2.0; },
                         [](double) { return 2.0; });
  CHECK_FALSE(validate_phi(bad).all_passed());
  CHECK_THROWS_AS(validate_phi(quadratic_phi(3.0), 50), Error);
  PhiSpec nan_phi = make_phi("nan", [](double t) { return t > 0.7 ? std::nan("") : t; },
                             [](double) { return 1.0; }, [](double) { return 1.0; });
  CHECK_THROWS_AS(validate_phi(nan_phi), Error);
}

TEST_CASE("quadratic phi family flags and derivatives") {
  PhiSpec phi = quadratic_phi(3.0);
  CHECK(phi.t_star == 0.0);
  CHECK(phi.in_L1);
  CHECK(phi.in_L2);
  CHECK(phi.cond_phi);
  CHECK(phi.d_left(1.0) == doctest::Approx(1.5));
  CHECK(phi.subdiff_hat_at_zero.lo == doctest::Approx(-0.5));
  CHECK(phi.subdiff_hat_at_zero.hi == doctest::Approx(0.5));
  CHECK(phi.zero_in_subdiff_hat_zero);
  CHECK_THROWS_AS(quadratic_phi(1.0), Error);
  CHECK_THROWS_AS(phi_from_tag("quad:a=x"), Error);
  CHECK(phi_from_tag("quad:a=3").params[0] == 3.0);
}

TEST_CASE("check_cond_phi") {
  CHECK(check_cond_phi(quadratic_phi(3.0)).holds());
  CondPhiReport lin = check_cond_phi(linear_phi());
  CHECK_FALSE(lin.holds());
  CHECK_FALSE(lin.hat_conj_differentiable);

  // Minimum at t = 0.25, so phi'(0+) < 0.
  auto f = [](double t) { return (t - 0.25) * (t - 0.25) / 0.5625; };
  auto df = [](double t) { return 2.0 * (t - 0.25) / 0.5625; };
  PhiSpec shifted = make_phi("shifted", f, df, df);
  CHECK(shifted.t_star == doctest::Approx(0.25).epsilon(1e-9));
  CondPhiReport r = check_cond_phi(shifted);
  CHECK_FALSE(r.interval_match);
  CHECK_FALSE(r.holds());
}

TEST_CASE("Fenchel-Young inequality and equality") {
  for (const PhiSpec& phi : {quadratic_phi(3.0), square_phi()}) {
    PsiSpec psi(phi);
    for (int i = 0; i <= 100; ++i) {
      const double s = -3.0 + 6.0 * i / 100.0;
      const double cs = psi.conj(s);
      for (int j = 0; j <= 100; ++j) {
        const double t = j / 100.0;
        CHECK(s * t <= psi.eval(t) + cs + 1e-10);
      }
      const double t = psi.conj_deriv(s);
      CHECK(std::abs(s * t - psi.eval(t) - cs) <= 1e-8);
    }
  }
}

TEST_CASE("psi conjugate is nondecreasing on R_+") {
  PsiSpec psi(quadratic_phi(2.0));
  double prev = psi.conj(0.0);
  for (int i = 1; i <= 1000; ++i) {
    double v = psi.conj(5.0 * i / 1000.0);
    CHECK(v >= prev - 1e-15);
    prev = v;
  }
}

TEST_CASE("conjugate derivative matches finite differences") {
  PsiSpec psi(quadratic_phi(3.0));
  const double h = 1e-6;
  for (double s : {0.1, 0.7, 1.0, 1.3, 2.5}) {
    double fd = (psi.conj(s + h) - psi.conj(s - h)) / (2 * h);
    CHECK(std::abs(fd - psi.conj_deriv(s)) <= 1e-6);
  }
}

TEST_CASE("grad_psi_star_spectral") {
  PsiSpec psi(quadratic_phi(3.0));
  CHECK(grad_psi_star_spectral(Matrix::Zero(2, 3), 1.0, psi).norm() == 0.0);

  Matrix X = Matrix::Zero(2, 2);
  X(0, 0) = 2.0;
  Matrix W = grad_psi_star_spectral(X, 1.0, psi);
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 1.0;
  CHECK((W - expect).norm() <= 1e-14);

  // (psi^*)'(1) = ((a+1) - 2) / (2(a-1)) = 0.5 for a = 3.
  X(0, 0) = 1.0;
  W = grad_psi_star_spectral(X, 1.0, psi);
  const double h = 1e-6;
  const double fd = (psi.conj(1.0 + h) - psi.conj(1.0 - h)) / (2 * h);
  CHECK(W(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(W(0, 0) - fd) <= 1e-8);
  CHECK(std::abs(W(1, 1)) + std::abs(W(0, 1)) + std::abs(W(1, 0)) <= 1e-14);

  CHECK_THROWS_AS(grad_psi_star_spectral(X, 1.0, PsiSpec(linear_phi())), Error);
}

TEST_CASE("grad_psi_star_spectral stays in the unit spectral ball and is frame independent") {
  PsiSpec psi(quadratic_phi(3.0));
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix X = randn(gen, 3, 5);
    const double rho = std::pow(10.0, uniform(gen, -2, 3));
    Matrix W = grad_psi_star_spectral(X, rho, psi);
    CHECK(spectral_norm(W) <= 1.0 + 1e-10);

    SvdFrame f = svd(X);
    SvdFrame g = f;
    for (int i = 0; i < 3; ++i)
      if (gen() & 1) {
        g.U.col(i) *= -1.0;
        g.V.col(i) *= -1.0;
      }
    // Columns of V beyond m carry no singular value: rotate them freely.
    Matrix R = rand_orthogonal(gen, 2);
    g.V.rightCols(2) = g.V.rightCols(2) * R;
    CHECK((grad_psi_star_spectral(f, rho, psi) - grad_psi_star_spectral(g, rho, psi)).norm() <= 1e-9);
  }
}

TEST_CASE("spectral_phi_subdiff selections") {
  PhiSpec phi = quadratic_phi(3.0);
  SpectralSubdiff z = spectral_phi_subdiff(Matrix::Zero(2, 2), phi);
  CHECK(z.wbar.norm() == 0.0);
  CHECK(z.intervals[0].lo == doctest::Approx(-0.5));
  CHECK(z.intervals[0].hi == doctest::Approx(0.5));

  SpectralSubdiff one = spectral_phi_subdiff(Matrix::Identity(2, 2), phi);
  CHECK(one.wbar(0) == doctest::Approx(1.5));
  CHECK(one.wbar(1) == doctest::Approx(1.5));
  CHECK(std::isinf(one.intervals[0].hi));

  Matrix W = Matrix::Zero(2, 2);
  W(0, 0) = 1.0;
  W(1, 1) = 0.5;
  SpectralSubdiff half = spectral_phi_subdiff(W, phi);
  CHECK(half.wbar(0) == doctest::Approx(1.5));
  CHECK(half.wbar(1) == doctest::Approx(1.0));
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 1.5;
  expect(1, 1) = 1.0;
  CHECK((half.DeltaW - expect).norm() <= 1e-12);

  W(0, 0) = 1.2;
  CHECK_THROWS_AS(spectral_phi_subdiff(W, phi), Error);
}
