#include <cmath>

#include "doctest.h"
#include "spatialmn/kernels.hpp"
#include "test_support.hpp"

using namespace smn;

namespace {

// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt by the trapezoid rule.
double bessel_k_quadrature(double nu, double x) {
  const double h = 1e-3;
  double sum = 0.5;  // t = 0 term: exp(-x) * 1, scaled below
  sum *= std::exp(-x);
  for (int k = 1;; ++k) {
    const double t = k * h;
    const double term = std::exp(-x * std::cosh(t)) * std::cosh(nu * t);
    sum += term;
    if (term < 1e-300 || t > 60.0) break;
  }
  return sum * h;
}

double matern_oracle(double d, double variance, double range, double nu) {
  const double x = d / range;
  return variance * std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(x, nu) *
         bessel_k_quadrature(nu, x);
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("exponential kernel values") {
    const KernelSpec spec{KernelFamily::exponential, 1.0, 1.0, 0.5};
    CHECK(exponential_cov(1.0, spec) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
    CHECK(exponential_cov(0.0, {KernelFamily::exponential, 2.5, 0.3, 0.5}) == 2.5);
    CHECK_THROWS_AS(exponential_cov(-0.1, spec), ValidationError);
    double prev = 1.0;
    for (double d = 0.1; d < 20.0; d += 0.1) {
      const double v = exponential_cov(d, spec);
      CHECK(v <= prev);
      prev = v;
    }
  }

  TEST_CASE("spec validation") {
    CHECK_THROWS_AS((KernelSpec{KernelFamily::matern, 0.0, 1.0, 0.5}.validate()), ValidationError);
    CHECK_THROWS_AS((KernelSpec{KernelFamily::matern, 1.0, -1.0, 0.5}.validate()), ValidationError);
    CHECK_THROWS_AS((KernelSpec{KernelFamily::matern, 1.0, 1.0, 0.0}.validate()), ValidationError);
    CHECK(kernel_family_from_string("matern") == KernelFamily::matern);
    CHECK(kernel_family_from_string("exponential") == KernelFamily::exponential);
    CHECK_THROWS_AS(kernel_family_from_string("gauss"), ValidationError);
  }

  TEST_CASE("matern with nu = 1/2 is the exponential kernel") {
    const KernelSpec m{KernelFamily::matern, 1.7, 0.6, 0.5};
    const KernelSpec e{KernelFamily::exponential, 1.7, 0.6, 0.5};
    for (double d = 0.0; d < 30.0; d += 0.05) {
      const double a = matern_cov(d, m);
      const double b = exponential_cov(d, e);
      CHECK(std::abs(a - b) <= 1e-12 * b);
    }
  }

  TEST_CASE("matern matches the integral representation of K_nu") {
    const KernelSpec spec{KernelFamily::matern, 1.0, 1.0, 0.25};
    CHECK(matern_cov(0.5, spec) == doctest::Approx(matern_oracle(0.5, 1.0, 1.0, 0.25)).epsilon(1e-10));
    for (double nu : {0.1, 0.25, 0.75, 1.5, 3.0}) {
      for (double x : {1e-3, 0.05, 0.5, 2.0, 10.0, 40.0}) {
        const KernelSpec s{KernelFamily::matern, 1.3, 0.8, nu};
        CAPTURE(nu);
        CAPTURE(x);
        CHECK(matern_cov(x * 0.8, s) ==
              doctest::Approx(matern_oracle(x * 0.8, 1.3, 0.8, nu)).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("matern at zero and far away") {
    const KernelSpec spec{KernelFamily::matern, 2.0, 0.5, 0.25};
    CHECK(matern_cov(0.0, spec) == 2.0);
    CHECK(matern_cov(1e-300, spec) <= 2.0);
    CHECK(matern_cov(1e6, spec) == 0.0);
    double prev = 2.0;
    for (double d = 0.01; d < 10.0; d += 0.01) {
      const double v = matern_cov(d, spec);
      CHECK(v <= prev);
      prev = v;
    }
  }

  TEST_CASE("covariance matrices") {
    const KernelSpec spec{KernelFamily::exponential, 1.5, 0.4, 0.5};
    const LocationSet one(Matrix::Constant(1, 2, 0.3));
    CHECK(covariance_matrix(one, spec)(0, 0) == 1.5);

    Matrix two(2, 2);
    two << 0.2, 0.2, 0.2, 0.2;
    const double eps = 1e-6;
    const Matrix k = covariance_matrix(LocationSet(two), spec, eps);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
    CHECK(eig.eigenvalues()(0) == doctest::Approx(eps).epsilon(1e-6));
    CHECK(eig.eigenvalues()(1) == doctest::Approx(3.0 + eps).epsilon(1e-12));

    Rng rng(2);
    for (KernelFamily fam : {KernelFamily::exponential, KernelFamily::matern}) {
      const LocationSet locs(test::random_points(10, 2, rng));
      const Matrix s = covariance_matrix(locs, {fam, 1.0, 0.3, 0.25});
      CHECK(s == s.transpose());
      CHECK(s.diagonal().isApproxToConstant(1.0));
      Eigen::SelfAdjointEigenSolver<Matrix> es(s);
      CHECK(es.eigenvalues()(0) > 0.0);
    }
  }
}
