#include <cmath>
#include <sstream>

#include "doctest.h"
#include "spatialmn/matnorm.hpp"
#include "spatialmn/simulation.hpp"
#include "test_support.hpp"

using namespace smn;

namespace {

SimScenario smoke_scenario() {
  SimScenario sc;
  sc.big_n = 4;
  sc.n = {30};
  sc.replicates = 3;
  sc.gibbs.m = 4;
  sc.gibbs.iterations = 80;
  sc.gibbs.burn_in = 40;
  sc.seed = 5;
  return sc;
}

}  // namespace

TEST_SUITE("simulation") {
  TEST_CASE("scale matrices") {
    const Matrix ar = scale_matrix(ScaleKind::ar, 3, 0.5);
    Matrix expect(3, 3);
    expect << 1, 0.5, 0.25, 0.5, 1, 0.5, 0.25, 0.5, 1;
    CHECK(test::max_abs(ar - expect) < 1e-15);
    const Matrix eq = scale_matrix(ScaleKind::equi, 3, 0.3);
    CHECK(eq(0, 2) == 0.3);
    CHECK(eq(1, 1) == 1.0);
    const Matrix band = scale_matrix(ScaleKind::banded, 4, 0.4);
    CHECK(band(0, 1) == 0.4);
    CHECK(band(0, 2) == 0.0);
    for (auto kind : {ScaleKind::ar, ScaleKind::equi, ScaleKind::banded})
      CHECK(scale_matrix(kind, 5, 0.0) == Matrix(Matrix::Identity(5, 5)));
    CHECK_THROWS_AS(scale_matrix(ScaleKind::banded, 20, 0.6), ValidationError);
    CHECK_THROWS_AS(scale_matrix(ScaleKind::equi, 5, -0.5), ValidationError);
    CHECK_THROWS_AS(scale_matrix(ScaleKind::ar, 5, 1.0), ValidationError);
    CHECK(scale_kind_from_string("Equi") == ScaleKind::equi);
    CHECK_THROWS_AS(scale_kind_from_string("toeplitz"), ValidationError);
  }

  TEST_CASE("relative Frobenius error") {
    const Matrix i2 = Matrix::Identity(2, 2);
    CHECK(relative_frobenius(i2, i2) == 0.0);
    CHECK(relative_frobenius(2.0 * i2, i2) == doctest::Approx(1.0));
    CHECK(relative_frobenius(Matrix::Zero(2, 2), i2) == doctest::Approx(1.0));
    CHECK_THROWS_AS(relative_frobenius(i2, Matrix::Zero(2, 2)), ValidationError);
  }

  TEST_CASE("KL metrics") {
    Rng rng(1);
    const Matrix lam = cov_to_corr(test::random_spd(3, rng));
    const Matrix sig = cov_to_corr(test::random_spd(5, rng));
    const KlMetrics exact = kl_metrics(lam, sig, lam, sig);
    CHECK(exact.kl_mn == doctest::Approx(0.0));
    const Matrix sig_hat = cov_to_corr(test::random_spd(5, rng));
    const KlMetrics m = kl_metrics(lam, sig, lam, sig_hat);
    CHECK(m.kl_mn > 0.0);
    CHECK(m.kl_n_log == doctest::Approx(std::log(m.kl_n)));
    CHECK(m.kl_n - m.kl_mn == doctest::Approx(row_ignorance_kl_pair(lam, sig, sig_hat.inverse().llt().matrixL()).predicted_gap).epsilon(1e-8));
    const KlMetrics zero = kl_metrics(Matrix::Identity(2, 2), sig, Matrix::Identity(2, 2), sig);
    CHECK(zero.kl_n_exact == (zero.kl_n <= 0.0));
    if (zero.kl_n_exact) CHECK(std::isinf(zero.kl_n_log));
  }

  TEST_CASE("matrix-normal draws have Kronecker second moments") {
    Rng rng(2);
    const Matrix lam = test::random_spd(2, rng);
    const Matrix sig = test::random_spd(3, rng);
    Matrix s = Matrix::Zero(6, 6);
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
      const Matrix y = sample_matrix_normal(lam, sig, rng);
      const Vector v = Eigen::Map<const Vector>(y.data(), 6);
      s += v * v.transpose();
    }
    s /= n;
    for (Index a = 0; a < 3; ++a)
      for (Index b = 0; b < 3; ++b)
        CHECK(test::max_abs(s.block(2 * a, 2 * b, 2, 2) - sig(a, b) * lam) < 0.03);
  }

  TEST_CASE("mean and sd skip non-finite values") {
    const MeanSd m = mean_sd({1.0, 3.0, std::nan(""), -std::numeric_limits<double>::infinity()});
    CHECK(m.mean == 2.0);
    CHECK(m.sd == doctest::Approx(std::sqrt(2.0)));
    CHECK(std::isnan(mean_sd({}).mean));
  }

  TEST_CASE("scenario validation and defaults") {
    SimScenario sc = smoke_scenario();
    CHECK(sc.resolved_truth_df() == 7.0);
    CHECK(sc.resolved_kernels().front().smoothness == 0.25);
    sc.n = {30, 30, 30};
    const auto ks = sc.resolved_kernels();
    REQUIRE(ks.size() == 3);
    CHECK(ks[2].variance == 2.0);
    CHECK(ks[0].smoothness == 0.5);
    sc.truth_iw_df = 2.0;
    CHECK_THROWS_AS(sc.validate(), ValidationError);
    sc = smoke_scenario();
    sc.n = {1};
    CHECK_THROWS_AS(sc.validate(), ValidationError);
  }

  TEST_CASE("smoke scenario is deterministic across thread counts") {
    SimScenario sc = smoke_scenario();
    const auto a = run_scenario(sc);
    CHECK(a.failures == 0);
    REQUIRE(a.rows.size() == 3);
    for (const auto& row : a.rows) {
      CHECK(row.ok);
      CHECK(row.re_lambda > 0.0);
      CHECK(row.re_sigma.size() == 1);
    }
    sc.threads = 3;
    const auto b = run_scenario(sc);
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(a.rows[r].re_lambda == b.rows[r].re_lambda);
      CHECK(a.rows[r].re_sigma == b.rows[r].re_sigma);
      CHECK(a.rows[r].kl_mn_log == b.rows[r].kl_mn_log);
    }
    std::ostringstream os;
    write_scenario_csv(os, sc, a);
    const std::string text = os.str();
    CHECK(text.rfind("row,status,N,n,scale,rho,kl_n_log,kl_mn_log,re_lambda,re_sigma_1,acceptance_rate\n", 0) == 0);
    CHECK(text.find("\nmean,summary,4,30,AR,0.5,") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);
  }

  TEST_CASE("multi-sample scenario") {
    SimScenario sc = smoke_scenario();
    sc.n = {20, 25};
    sc.replicates = 2;
    const auto res = run_scenario(sc);
    CHECK(res.failures == 0);
    CHECK(res.re_sigma.size() == 2);
    CHECK(std::isnan(res.rows[0].kl_n_log));
  }
}
