#include <cmath>
#include <vector>

#include "doctest.h"
#include "spatialmn/random.hpp"
#include "test_support.hpp"

using namespace smn;

TEST_SUITE("random") {
  TEST_CASE("identical seeds and keys give identical streams") {
    Rng a(123), b(123), c(124);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
      const auto x = a();
      all_equal = all_equal && x == b();
      any_diff = any_diff || x != c();
    }
    CHECK(all_equal);
    CHECK(any_diff);
    Rng s1 = Rng::stream(9, StreamTag::column_update, 3, 0, 7);
    Rng s2 = Rng::stream(9, StreamTag::column_update, 3, 0, 7);
    Rng s3 = Rng::stream(9, StreamTag::column_update, 3, 0, 8);
    Rng s4 = Rng::stream(9, StreamTag::lambda_update, 3, 0, 7);
    const auto v1 = s1();
    CHECK(v1 == s2());
    CHECK(v1 != s3());
    CHECK(v1 != s4());
  }

  TEST_CASE("uniform draws lie strictly inside (0, 1)") {
    Rng rng(5);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      REQUIRE(u > 0.0);
      REQUIRE(u < 1.0);
      sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  }

  TEST_CASE("below stays in range and covers it") {
    Rng rng(6);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
      const auto k = rng.below(7);
      REQUIRE(k < 7);
      ++hits[k];
    }
    for (int h : hits) CHECK(h > 800);
  }

  TEST_CASE("normal moments") {
    Rng rng(11);
    const int n = 200000;
    double s1 = 0.0, s2 = 0.0, s4 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = rng.normal();
      s1 += z;
      s2 += z * z;
      s4 += z * z * z * z;
    }
    CHECK(std::abs(s1 / n) < 4.0 / std::sqrt(n));
    CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(s4 / n - 3.0) < 4.0 * std::sqrt(96.0 / n));
  }

  TEST_CASE("gamma mean and variance equal the shape") {
    for (double shape : {0.3, 1.0, 2.5, 11.0}) {
      Rng rng(static_cast<std::uint64_t>(shape * 100));
      const int n = 200000;
      double s1 = 0.0, s2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double g = rng.gamma(shape);
        REQUIRE(g > 0.0);
        s1 += g;
        s2 += g * g;
      }
      const double mean = s1 / n;
      const double var = s2 / n - mean * mean;
      CAPTURE(shape);
      CHECK(std::abs(mean - shape) < 4.0 * std::sqrt(shape / n));
      CHECK(std::abs(var - shape) / shape < 0.03);
    }
  }

  TEST_CASE("inverse gamma mean is scale / (shape - 1)") {
    Rng rng(21);
    const double shape = 6.0, scale = 3.0;
    const int n = 100000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = rng.inverse_gamma(shape, scale);
      s1 += x;
      s2 += x * x;
    }
    const double mean = scale / (shape - 1.0);
    const double sd = mean / std::sqrt(shape - 2.0);
    CHECK(std::abs(s1 / n - mean) < 4.0 * sd / std::sqrt(n));
  }

  TEST_CASE("inverse Wishart mean is scale / (df - p - 1)") {
    Rng rng(31);
    const Matrix scale = Matrix::Identity(3, 3);
    const double df = 3.0 + 4.0;
    const int n = 100000;
    Matrix sum = Matrix::Zero(3, 3);
    for (int i = 0; i < n; ++i) sum += sample_inverse_wishart(df, scale, rng);
    const Matrix mean = sum / n;
    CHECK(test::max_abs(mean - scale / (df - 3.0 - 1.0)) < 0.01);
  }

  TEST_CASE("inverse Wishart with a general scale") {
    Rng rng(32);
    Rng mk(99);
    const Matrix scale = test::random_spd(4, mk);
    const double df = 12.5;
    const int n = 100000;
    Matrix sum = Matrix::Zero(4, 4);
    for (int i = 0; i < n; ++i) sum += sample_inverse_wishart(df, scale, rng);
    const Matrix expect = scale / (df - 4.0 - 1.0);
    CHECK(test::max_abs(sum / n - expect) < 0.02 * expect.cwiseAbs().maxCoeff());
  }

  TEST_CASE("one-dimensional inverse Wishart is an inverse gamma") {
    // IW_1(df, s) = IG(df / 2, s / 2), so 1/X ~ Gamma(df/2, rate s/2):
    // E[1/X] = df / s and Var[1/X] = 2 df / s^2.
    Rng rng(41);
    const double df = 5.0, s = 3.0;
    const int n = 100000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double inv = 1.0 / sample_inverse_wishart(df, Matrix::Constant(1, 1, s), rng)(0, 0);
      s1 += inv;
      s2 += inv * inv;
    }
    const double mean = s1 / n;
    CHECK(std::abs(mean - df / s) < 4.0 * std::sqrt(2.0 * df / (s * s) / n));
    CHECK(std::abs((s2 / n - mean * mean) - 2.0 * df / (s * s)) < 0.05 * 2.0 * df / (s * s));
  }

  TEST_CASE("inverse Wishart rejects df below the dimension and is reproducible") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_inverse_wishart(2.0, Matrix::Identity(3, 3), rng), ValidationError);
    Rng a(77), b(77);
    CHECK(sample_inverse_wishart(5.0, Matrix::Identity(3, 3), a) ==
          sample_inverse_wishart(5.0, Matrix::Identity(3, 3), b));
  }
}
