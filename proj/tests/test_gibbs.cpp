#include <cmath>

#include "doctest.h"
#include "spatialmn/gibbs.hpp"
#include "spatialmn/kernels.hpp"
#include "spatialmn/matnorm.hpp"
#include "test_support.hpp"

using namespace smn;

namespace {

// log int_0^inf N(y; 0, d S) IG(d; alpha, beta) dd by the trapezoid rule on log d.
double mixture_logpdf(const Vector& y, const Matrix& s, double alpha, double beta) {
  const double h = 2e-3;
  double peak = -std::numeric_limits<double>::infinity();
  std::vector<double> vals;
  for (double t = -25.0; t <= 25.0; t += h) {
    const double d = std::exp(t);
    const double log_ig =
        alpha * std::log(beta) - std::lgamma(alpha) - (alpha + 1.0) * t - beta / d;
    const double v = test::mvn_logpdf(y, d * s) + log_ig + t;
    vals.push_back(v);
    peak = std::max(peak, v);
  }
  double sum = 0.0;
  for (double v : vals) sum += std::exp(v - peak);
  return peak + std::log(sum * h);
}

OrderedSample toy_sample(Index big_n, Index n, Index m, std::uint64_t seed) {
  Rng rng(seed);
  const LocationSet locs(test::random_points(n, 2, rng));
  Matrix y(big_n, n);
  for (Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
  return prepare_sample(y, locs, m);
}

GibbsConfig small_config() {
  GibbsConfig c;
  c.m = 4;
  c.iterations = 120;
  c.burn_in = 60;
  c.seed = 17;
  c.factor_stride = 20;
  return c;
}

}  // namespace

TEST_SUITE("gibbs") {
  TEST_CASE("column prior worked example") {
    HyperParams hp;
    hp.log_theta << 0.0, 0.0, 0.0;
    const ColumnPrior p = column_prior(hp, 1, 2, 0);
    CHECK(p.alpha == 6.0);
    CHECK(p.beta == doctest::Approx(3.160602794142788).epsilon(1e-12));
    CHECK(p.v_diag.size() == 0);
    const ColumnPrior q = column_prior(hp, 5, 2, 3);
    const double f = 1.0 - std::exp(-std::pow(5.0, -0.5));
    for (Index j = 0; j < 3; ++j)
      CHECK(q.v_diag(j) == doctest::Approx(std::exp(-(j + 1.0) / f)).epsilon(1e-13));
    hp.log_theta(2) = -800.0;
    CHECK(column_prior(hp, 5, 2, 3).v_diag.isOnes());
  }

  TEST_CASE("column prior rejects degenerate hyperparameters") {
    HyperParams hp;
    hp.log_theta << 0.0, -800.0, 0.0;
    CHECK_THROWS_AS(column_prior(hp, 3, 2, 1), NumericalError);
    hp.log_theta << 0.0, 0.0, 0.0;
    CHECK_THROWS_AS(column_prior(hp, 2, 2, 2), ValidationError);
    CHECK_THROWS_AS(column_prior(hp, 0, 2, 0), ValidationError);
  }

  TEST_CASE("design matrix negates neighbour columns") {
    Matrix y(2, 3);
    y << 1, 2, 3, 4, 5, 6;
    const Matrix x = design_matrix(y, {2, 0});
    CHECK(x(0, 0) == -3.0);
    CHECK(x(1, 1) == -4.0);
  }

  TEST_CASE("scalar column posterior by hand") {
    // N = 1, one neighbour, Lambda = 2: G = 1/v + x^2/2, H = x y / 2.
    Vector y(1), xv(1);
    y << 1.5;
    xv << -0.7;
    const Matrix x = xv;
    ColumnPrior prior;
    prior.beta = 0.8;
    prior.v_diag = Vector::Constant(1, 0.4);
    const auto post = column_posterior(y, x, Matrix::Constant(1, 1, 0.5), prior);
    const double g = 1.0 / 0.4 + 0.49 / 2.0;
    const double hh = -0.7 * 1.5 / 2.0;
    CHECK(post.g_inv(0, 0) == doctest::Approx(1.0 / g).epsilon(1e-14));
    CHECK(post.mean(0) == doctest::Approx(hh / g).epsilon(1e-14));
    CHECK(post.alpha_tilde == 6.5);
    CHECK(post.beta_tilde == doctest::Approx(0.8 + 0.5 * (2.25 / 2.0 - hh * hh / g)).epsilon(1e-14));
    CHECK(post.logdet_g_inv == doctest::Approx(-std::log(g)).epsilon(1e-14));
  }

  TEST_CASE("column without neighbours") {
    Vector y(3);
    y << 1, -2, 0.5;
    ColumnPrior prior;
    prior.beta = 1.0;
    const auto post = column_posterior(y, Matrix(3, 0), Matrix::Identity(3, 3), prior);
    CHECK(post.alpha_tilde == 7.5);
    CHECK(post.beta_tilde == doctest::Approx(1.0 + 0.5 * 5.25));
    Rng rng(1);
    const auto draw = sample_column(post, rng);
    CHECK(draw.u.size() == 0);
    CHECK(draw.d > 0.0);
  }

  TEST_CASE("column draws have the conditional moments") {
    Rng mk(2);
    const Matrix lam = test::random_spd(3, mk);
    Matrix x(3, 2);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = mk.normal();
    const Vector y = mk.normal_vector(3);
    ColumnPrior prior;
    prior.beta = 1.3;
    prior.v_diag = Vector::Constant(2, 0.6);
    const auto post = column_posterior(y, x, lam.inverse(), prior);
    Rng rng(3);
    const int n = 100000;
    double sd = 0.0;
    Vector su = Vector::Zero(2);
    for (int k = 0; k < n; ++k) {
      const auto draw = sample_column(post, rng);
      sd += draw.d;
      su += draw.u;
    }
    const double d_mean = post.beta_tilde / (post.alpha_tilde - 1.0);
    CHECK(sd / n == doctest::Approx(d_mean).epsilon(0.01));
    CHECK(test::max_abs(su / n - post.mean) < 0.01 + 0.01 * test::max_abs(post.mean));
  }

  TEST_CASE("Lambda conditional") {
    Matrix r(2, 3);
    r << 1, 0, 2, 0, 1, 1;
    Vector d(3);
    d << 1, 2, 4;
    const auto post = lambda_posterior(r, d, Matrix::Identity(2, 2), 4.0);
    Matrix expect = Matrix::Identity(2, 2);
    for (Index i = 0; i < 3; ++i) expect += r.col(i) * r.col(i).transpose() / d(i);
    CHECK(test::max_abs(post.scale - expect) < 1e-14);
    CHECK(post.df == 7.0);
    Rng rng(4);
    Matrix sum = Matrix::Zero(2, 2);
    const int n = 100000;
    for (int k = 0; k < n; ++k) sum += sample_lambda(r, d, Matrix::Identity(2, 2), 4.0, rng);
    CHECK(test::max_abs(sum / n - expect / (7.0 - 2.0 - 1.0)) < 0.02);
    CHECK_THROWS_AS(lambda_posterior(r, Vector::Ones(2), Matrix::Identity(2, 2), 4.0),
                    ValidationError);
  }

  TEST_CASE("marginal likelihood matches numerical integration") {
    Rng rng(5);
    for (int rep = 0; rep < 3; ++rep) {
      const Index big_n = 1 + rep;
      const Index n = 4;
      Matrix y(big_n, n);
      for (Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
      const Matrix lam = test::random_spd(big_n, rng);
      const std::vector<std::vector<Index>> nb{{}, {0}, {1, 0}, {0, 2}};
      HyperParams hp;
      hp.log_theta << 0.2, -0.5, 0.3;
      double oracle = 0.0;
      for (Index i = 0; i < n; ++i) {
        const auto prior = column_prior(hp, i + 1, 2, static_cast<Index>(nb[i].size()));
        Matrix s = lam;
        if (!nb[i].empty()) {
          const Matrix x = design_matrix(y, nb[i]);
          s += x * prior.v_diag.asDiagonal() * x.transpose();
        }
        oracle += mixture_logpdf(y.col(i), s, prior.alpha, prior.beta);
      }
      const double got = marginal_loglik_theta(y, nb, lam, hp, 2) +
                         marginal_loglik_constant(big_n, n, lam);
      CAPTURE(big_n);
      CHECK(got == doctest::Approx(oracle).epsilon(1e-8));
    }
  }

  TEST_CASE("regression likelihood with full conditioning is the matrix-normal density") {
    Rng rng(6);
    const Index big_n = 3, n = 8;
    const LocationSet locs(test::random_points(n, 2, rng));
    const Matrix sigma = covariance_matrix(locs, {KernelFamily::matern, 1.0, 0.4, 0.25});
    const Matrix lam = test::random_spd(big_n, rng);
    std::vector<std::vector<Index>> sets(n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < i; ++j) sets[i].push_back(j);
    const SparseCholesky chol = vecchia_factor(sigma, sets);
    Matrix y(big_n, n);
    for (Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
    CHECK(regression_loglik(y, chol, lam) ==
          doctest::Approx(matnorm_logpdf(y, {Matrix(), lam, sigma})).epsilon(1e-10));
  }

  TEST_CASE("prepare_sample orders columns") {
    const OrderedSample s = toy_sample(2, 15, 3, 7);
    CHECK(s.y.cols() == 15);
    CHECK(s.ordering.neighbors.size() == 15);
    CHECK_THROWS_AS(prepare_sample(Matrix::Zero(2, 4), LocationSet(Matrix::Zero(5, 2)), 3),
                    ValidationError);
  }

  TEST_CASE("config validation") {
    GibbsConfig c = small_config();
    CHECK_NOTHROW(c.validate(3));
    GibbsConfig bad = c;
    bad.burn_in = bad.iterations;
    CHECK_THROWS_AS(bad.validate(3), ValidationError);
    bad = c;
    bad.m = 0;
    CHECK_THROWS_AS(bad.validate(3), ValidationError);
    bad = c;
    bad.iw_df = 1.5;
    CHECK_THROWS_AS(bad.validate(3), ValidationError);
    bad = c;
    bad.iw_scale = Matrix::Identity(2, 2);
    CHECK_THROWS_AS(bad.validate(3), ValidationError);
    bad = c;
    bad.proposal_shape_init(0, 0) = -1.0;
    CHECK_THROWS_AS(bad.validate(3), ValidationError);
    bad = c;
    bad.threads = 0;
    CHECK_THROWS_AS(bad.validate(3), ValidationError);
  }

  TEST_CASE("runs are bitwise reproducible across thread counts") {
    const OrderedSample s = toy_sample(3, 40, 4, 8);
    GibbsConfig c = small_config();
    const auto a = run_gibbs(s, c);
    const auto b = run_gibbs(s, c);
    c.threads = 3;
    const auto t = run_gibbs(s, c);
    for (const auto* other : {&b, &t}) {
      CHECK(other->theta_trace == a.theta_trace);
      CHECK(other->loglik_trace == a.loglik_trace);
      CHECK(other->lambda_mean == a.lambda_mean);
      CHECK(other->samples[0].col_corr_mean == a.samples[0].col_corr_mean);
      CHECK(other->samples[0].d_mean == a.samples[0].d_mean);
    }
    CHECK(a.draws == 60);
    CHECK(a.theta_trace.size() == 120);
    CHECK(a.lambda_draws.size() == 60);
    CHECK(a.samples[0].factor_draws.size() == 3);
    CHECK(a.lambda_corr_mean.diagonal().isOnes(1e-12));
    CHECK(a.samples[0].col_corr_mean.rows() == 40);
    for (double ll : a.loglik_trace) CHECK(std::isfinite(ll));
  }

  TEST_CASE("different seeds give different chains") {
    const OrderedSample s = toy_sample(3, 30, 4, 9);
    GibbsConfig c = small_config();
    const auto a = run_gibbs(s, c);
    c.seed = 18;
    CHECK(run_gibbs(s, c).lambda_mean != a.lambda_mean);
  }

  TEST_CASE("one-sample multi run equals the single-sample run") {
    const OrderedSample s = toy_sample(2, 25, 3, 10);
    const GibbsConfig c = small_config();
    const auto a = run_gibbs(s, c);
    const auto b = run_gibbs_multi({s}, c);
    CHECK(a.theta_trace == b.theta_trace);
    CHECK(a.lambda_mean == b.lambda_mean);
  }

  TEST_CASE("multi-sample runs require matching gene counts") {
    const OrderedSample a = toy_sample(2, 20, 3, 11);
    const OrderedSample b = toy_sample(3, 20, 3, 12);
    CHECK_THROWS_AS(run_gibbs_multi({a, b}, small_config()), ValidationError);
    const OrderedSample c = toy_sample(2, 35, 3, 13);
    const auto out = run_gibbs_multi({a, c}, small_config());
    CHECK(out.samples.size() == 2);
    CHECK(out.samples[1].d_mean.size() == 35);
  }
}
