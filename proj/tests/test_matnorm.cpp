#include <cmath>

#include "doctest.h"
#include "spatialmn/matnorm.hpp"
#include "spatialmn/random.hpp"
#include "test_support.hpp"

using namespace smn;

namespace {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector vec(const Matrix& y) { return Eigen::Map<const Vector>(y.data(), y.size()); }

// KL between zero-mean Gaussians straight from the definition, via LU.
double kl_oracle(const Matrix& s1, const Matrix& s2) {
  const Eigen::FullPivLU<Matrix> lu2(s2);
  const double k = static_cast<double>(s1.rows());
  return 0.5 * (lu2.solve(s1).trace() - k +
                std::log(lu2.determinant()) - std::log(Eigen::FullPivLU<Matrix>(s1).determinant()));
}

}  // namespace

TEST_SUITE("matnorm") {
  TEST_CASE("Gaussian KL worked example") {
    const Matrix i2 = Matrix::Identity(2, 2);
    CHECK(kl_mvn(i2, 2.0 * i2) == doctest::Approx(0.1931471805599453).epsilon(1e-14));
    CHECK(kl_mvn(i2, i2) == doctest::Approx(0.0));
    CHECK_THROWS_AS(kl_mvn(i2, Matrix::Identity(3, 3)), ValidationError);
  }

  TEST_CASE("Gaussian KL agrees with the LU oracle") {
    Rng rng(1);
    for (int rep = 0; rep < 30; ++rep) {
      const Index k = 1 + rep % 6;
      const Matrix a = test::random_spd(k, rng), b = test::random_spd(k, rng);
      CHECK(kl_mvn(a, b) == doctest::Approx(kl_oracle(a, b)).epsilon(1e-10));
      CHECK(kl_mvn(a, b) >= 0.0);
    }
  }

  TEST_CASE("log-determinant rejects indefinite input") {
    Matrix a(2, 2);
    a << 1, 2, 2, 1;
    CHECK_THROWS_AS(logdet_spd(a), NumericalError);
    CHECK(logdet_spd(Matrix::Identity(3, 3) * 2.0) == doctest::Approx(3.0 * std::log(2.0)));
  }

  TEST_CASE("matrix-normal density equals the vectorised Gaussian") {
    Rng rng(2);
    for (int rep = 0; rep < 20; ++rep) {
      const Index big_n = 1 + rep % 4, n = 1 + rep % 5;
      const Matrix lam = test::random_spd(big_n, rng), sig = test::random_spd(n, rng);
      Matrix y(big_n, n), mean(big_n, n);
      for (Index i = 0; i < y.size(); ++i) {
        y.data()[i] = rng.normal();
        mean.data()[i] = rng.normal() * 0.3;
      }
      const double got = matnorm_logpdf(y, {mean, lam, sig});
      CHECK(got == doctest::Approx(test::mvn_logpdf(vec(y - mean), kron(sig, lam))).epsilon(1e-10));
      const double zero_mean = matnorm_logpdf(y, {Matrix(), lam, sig});
      CHECK(zero_mean == doctest::Approx(test::mvn_logpdf(vec(y), kron(sig, lam))).epsilon(1e-10));
    }
  }

  TEST_CASE("matrix-normal KL equals the Kronecker Gaussian KL") {
    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
      const Index big_n = 1 + rep % 4, n = 1 + rep % 6;
      const MatrixNormalParams p{Matrix(), test::random_spd(big_n, rng), test::random_spd(n, rng)};
      const MatrixNormalParams q{Matrix(), test::random_spd(big_n, rng), test::random_spd(n, rng)};
      const double oracle = kl_oracle(kron(p.col_cov, p.row_cov), kron(q.col_cov, q.row_cov));
      CHECK(std::abs(kl_matnorm(p, q) - oracle) < 1e-9);
    }
  }

  TEST_CASE("covariance to correlation") {
    Matrix a(2, 2);
    a << 4, 1, 1, 9;
    const Matrix c = cov_to_corr(a);
    CHECK(c(0, 0) == 1.0);
    CHECK(c(1, 1) == 1.0);
    CHECK(c(0, 1) == doctest::Approx(1.0 / 6.0));
    CHECK(c(1, 0) == c(0, 1));
  }

  TEST_CASE("row-ignorance gap matches the closed form") {
    Rng rng(4);
    for (int rep = 0; rep < 20; ++rep) {
      const Index big_n = 2 + rep % 3, n = 3 + rep % 4;
      const Matrix lam = test::random_spd(big_n, rng);
      const Matrix sig = test::random_spd(n, rng);
      Matrix l = Matrix::Zero(n, n);
      for (Index j = 0; j < n; ++j) {
        l(j, j) = 0.5 + rng.uniform();
        for (Index i = j + 1; i < n; ++i) l(i, j) = 0.3 * rng.normal();
      }
      const auto r = row_ignorance_kl_pair(lam, sig, l);
      CHECK(r.kl_ignoring_rows - r.kl_with_rows == doctest::Approx(r.predicted_gap).epsilon(1e-9));
    }
    const auto eq = row_ignorance_kl_pair(Matrix::Identity(3, 3), Matrix::Identity(4, 4),
                                          Matrix::Identity(4, 4) * 1.1);
    CHECK(std::abs(eq.kl_ignoring_rows - eq.kl_with_rows) < 1e-12);
  }
}
