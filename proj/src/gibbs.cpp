#include "spatialmn/gibbs.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "spatialmn/matnorm.hpp"
#include "spatialmn/parallel.hpp"

namespace smn {

ColumnPrior column_prior(const HyperParams& hyper, Index rank, int p, Index m_i) {
  require(rank >= 1, "column rank is 1-based");
  require(p >= 1, "spatial dimension must be positive");
  require(m_i >= 0 && m_i <= rank - 1, "neighbour count exceeds earlier ranks");
  const double theta1 = hyper.theta(0);
  const double theta2 = hyper.theta(1);
  const double theta3 = hyper.theta(2);
  const double f = -std::expm1(-theta2 * std::pow(static_cast<double>(rank), -1.0 / p));
  ColumnPrior prior;
  prior.alpha = 6.0;
  prior.beta = 5.0 * theta1 * f;
  if (!(prior.beta > 0.0) || !std::isfinite(prior.beta)) {
    throw NumericalError("column prior at rank " + std::to_string(rank) + ": beta = " +
                         std::to_string(prior.beta) + " is not positive (theta2 too small?)");
  }
  prior.v_diag.resize(m_i);
  for (Index j = 0; j < m_i; ++j) {
    prior.v_diag(j) = std::exp(-theta3 * static_cast<double>(j + 1) / f);
  }
  return prior;
}

Matrix design_matrix(const Matrix& y_ordered, const std::vector<Index>& neighbors) {
  Matrix x(y_ordered.rows(), static_cast<Index>(neighbors.size()));
  for (std::size_t j = 0; j < neighbors.size(); ++j) x.col(j) = -y_ordered.col(neighbors[j]);
  return x;
}

ColumnStats column_stats(const Vector& y, const Matrix& x, const Matrix& lambda_inv) {
  require(x.rows() == y.size() && lambda_inv.rows() == y.size(), "column_stats: dimension mismatch");
  ColumnStats s;
  const Matrix lx = lambda_inv * x;
  s.gram = x.transpose() * lx;
  s.gram = 0.5 * (s.gram + s.gram.transpose());
  s.h = lx.transpose() * y;
  s.yy = y.dot(lambda_inv * y);
  s.rows = y.size();
  return s;
}

ColumnPosterior column_posterior(const ColumnStats& stats, const ColumnPrior& prior, Index column) {
  const Index k = prior.v_diag.size();
  require(stats.gram.rows() == k && stats.h.size() == k, "column posterior: dimension mismatch");
  ColumnPosterior post;
  post.alpha_tilde = prior.alpha + 0.5 * static_cast<double>(stats.rows);
  post.h = stats.h;
  double reduction = 0.0;
  if (k > 0) {
    Matrix g = stats.gram;
    g.diagonal() += prior.v_diag.cwiseInverse();
    Eigen::LLT<Matrix> llt(g);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("column posterior: G is not positive definite at column " +
                           std::to_string(column));
    }
    post.g_chol = llt.matrixL();
    post.g_inv = llt.solve(Matrix::Identity(k, k));
    post.g_inv = 0.5 * (post.g_inv + post.g_inv.transpose());
    post.mean = llt.solve(stats.h);
    post.logdet_g_inv = -2.0 * post.g_chol.diagonal().array().log().sum();
    // H^T G^{-1} H as |L^{-1} H|^2.
    reduction = post.g_chol.triangularView<Eigen::Lower>().solve(stats.h).squaredNorm();
  }
  const double quad = stats.yy - reduction;
  post.beta_tilde = std::max(prior.beta + 0.5 * quad, prior.beta * (1.0 + 1e-12));
  if (!std::isfinite(post.beta_tilde)) {
    throw NumericalError("column posterior: non-finite beta at column " + std::to_string(column));
  }
  return post;
}

ColumnPosterior column_posterior(const Vector& y, const Matrix& x, const Matrix& lambda_inv,
                                 const ColumnPrior& prior) {
  return column_posterior(column_stats(y, x, lambda_inv), prior);
}

ColumnDraw sample_column(const ColumnPosterior& post, Rng& rng) {
  ColumnDraw draw;
  draw.d = rng.inverse_gamma(post.alpha_tilde, post.beta_tilde);
  const Index k = post.mean.size();
  if (k == 0) return draw;
  // G = L L^T, so L^{-T} z has covariance G^{-1}.
  const Vector z = rng.normal_vector(k);
  draw.u = post.mean +
           std::sqrt(draw.d) * post.g_chol.transpose().triangularView<Eigen::Upper>().solve(z);
  return draw;
}

LambdaPosterior lambda_posterior(const Matrix& residuals, const Vector& d, const Matrix& psi, double nu) {
  require(residuals.cols() == d.size(), "lambda_posterior: one d per residual");
  require(psi.rows() == residuals.rows() && psi.cols() == residuals.rows(),
          "lambda_posterior: Psi dimension mismatch");
  require((d.array() > 0.0).all(), "lambda_posterior: all d_i must be positive");
  const Matrix scaled = residuals * d.cwiseSqrt().cwiseInverse().asDiagonal();
  LambdaPosterior post;
  post.scale = psi + scaled * scaled.transpose();
  post.scale = 0.5 * (post.scale + post.scale.transpose());
  post.df = static_cast<double>(residuals.cols()) + nu;
  return post;
}

Matrix sample_lambda(const Matrix& residuals, const Vector& d, const Matrix& psi, double nu,
                     Rng& rng) {
  const LambdaPosterior post = lambda_posterior(residuals, d, psi, nu);
  return sample_inverse_wishart(post.df, post.scale, rng);
}

double marginal_column_term(const ColumnPosterior& post, const ColumnPrior& prior) {
  const double logdet_v = prior.v_diag.array().log().sum();
  return 0.5 * post.logdet_g_inv - 0.5 * logdet_v + prior.alpha * std::log(prior.beta) -
         post.alpha_tilde * std::log(post.beta_tilde) + std::lgamma(post.alpha_tilde) -
         std::lgamma(prior.alpha);
}

namespace {

Eigen::LLT<Matrix> lambda_factor(const Matrix& lambda) {
  Eigen::LLT<Matrix> llt(lambda);
  if (llt.info() != Eigen::Success) throw NumericalError("Lambda is not positive definite");
  return llt;
}

/// Column statistics from the whitened data Z = L^{-1} Y (Lambda = L L^T).
ColumnStats whitened_stats(const Matrix& z, Index col, const std::vector<Index>& g) {
  const Index k = static_cast<Index>(g.size());
  ColumnStats s;
  s.rows = z.rows();
  Matrix zg(z.rows(), k);
  for (Index j = 0; j < k; ++j) zg.col(j) = z.col(g[j]);
  s.gram = zg.transpose() * zg;
  s.h = -(zg.transpose() * z.col(col));
  s.yy = z.col(col).squaredNorm();
  return s;
}

}  // namespace

double marginal_loglik_theta(const Matrix& y_ordered, const std::vector<std::vector<Index>>& neighbors,
                             const Matrix& lambda, const HyperParams& hyper, int p) {
  const Index n = y_ordered.cols();
  require(static_cast<Index>(neighbors.size()) == n, "one neighbour set per column");
  require(lambda.rows() == y_ordered.rows(), "Lambda dimension mismatch");
  const auto llt = lambda_factor(lambda);
  const Matrix z = llt.matrixL().solve(y_ordered);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const ColumnPrior prior =
        column_prior(hyper, i + 1, p, static_cast<Index>(neighbors[i].size()));
    total += marginal_column_term(column_posterior(whitened_stats(z, i, neighbors[i]), prior, i), prior);
  }
  return total;
}

double marginal_loglik_constant(Index big_n, Index n, const Matrix& lambda) {
  return -0.5 * static_cast<double>(big_n * n) * std::log(2.0 * std::numbers::pi) -
         0.5 * static_cast<double>(n) * logdet_spd(lambda, "Lambda");
}

double regression_loglik(const Matrix& y_ordered, const SparseCholesky& chol, const Matrix& lambda) {
  const Index big_n = y_ordered.rows();
  const Index n = y_ordered.cols();
  require(chol.size() == n, "factor size does not match the number of columns");
  chol.validate();
  const auto llt = lambda_factor(lambda);
  const double logdet_lambda = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    Vector r = y_ordered.col(i);
    for (std::size_t j = 0; j < chol.rows[i].size(); ++j)
      r += chol.values[i](j) * y_ordered.col(chol.rows[i][j]);
    const double quad = llt.matrixL().solve(r).squaredNorm() / chol.diag(i);
    total += -0.5 * (static_cast<double>(big_n) * std::log(2.0 * std::numbers::pi * chol.diag(i)) +
                     logdet_lambda + quad);
  }
  return total;
}

OrderedSample prepare_sample(const Matrix& y, const LocationSet& locs, Index m) {
  require(y.cols() == locs.size(), "expression columns (" + std::to_string(y.cols()) +
                                       ") do not match the number of locations (" +
                                       std::to_string(locs.size()) + ")");
  require(y.allFinite(), "expression matrix contains non-finite values");
  OrderedSample s;
  s.ordering = build_ordering(locs, m);
  s.ordered_locations = locs.permuted(s.ordering.order);
  s.y.resize(y.rows(), y.cols());
  for (Index r = 0; r < y.cols(); ++r) s.y.col(r) = y.col(s.ordering.order[r]);
  s.spatial_dim = static_cast<int>(locs.dim());
  return s;
}

Eigen::Matrix3d GibbsConfig::default_proposal_shape() {
  Eigen::Matrix3d s;
  s << 0.05, -0.04, 0.0, -0.04, 0.05, 0.0, 0.0, 0.0, 0.01;
  return s;
}

void GibbsConfig::validate(Index big_n) const {
  require(m >= 1, "m must be at least 1");
  require(iterations >= 1, "iterations must be positive");
  require(burn_in >= 0 && burn_in < iterations, "burn_in must lie in [0, iterations)");
  require(threads >= 1, "threads must be positive");
  require(factor_stride >= 0 && column_summary_stride >= 1, "strides must be nonnegative");
  require(target_acceptance > 0.0 && target_acceptance < 1.0, "target acceptance must be in (0,1)");
  require(theta_init.allFinite(), "theta_init must be finite");
  const double nu = iw_df.value_or(static_cast<double>(big_n) + 2.0);
  require(nu > static_cast<double>(big_n) - 1.0,
          "inverse-Wishart df must exceed N - 1 (N = " + std::to_string(big_n) + ")");
  if (iw_scale) {
    require(iw_scale->rows() == big_n && iw_scale->cols() == big_n,
            "inverse-Wishart scale must be N x N");
    Eigen::LLT<Matrix> llt(*iw_scale);
    require(llt.info() == Eigen::Success, "inverse-Wishart scale must be SPD");
  }
  const Matrix shape = proposal_shape_init;
  Eigen::LLT<Matrix> shape_llt(shape);
  require(shape_llt.info() == Eigen::Success, "proposal shape must be SPD");
}

PosteriorSamples run_gibbs(const OrderedSample& sample, const GibbsConfig& config) {
  return run_gibbs_multi({sample}, config);
}

namespace {

struct ColumnRef {
  std::size_t sample;
  Index column;
};

}  // namespace

PosteriorSamples run_gibbs_multi(const std::vector<OrderedSample>& samples,
                                 const GibbsConfig& config) {
  require(!samples.empty(), "at least one sample is required");
  const Index big_n = samples.front().y.rows();
  for (std::size_t r = 0; r < samples.size(); ++r) {
    require(samples[r].y.rows() == big_n,
            "sample " + std::to_string(r) + " has " + std::to_string(samples[r].y.rows()) +
                " genes; expected " + std::to_string(big_n));
    require(static_cast<Index>(samples[r].ordering.neighbors.size()) == samples[r].y.cols(),
            "sample " + std::to_string(r) + " is missing neighbour sets");
  }
  config.validate(big_n);

  const double nu = config.iw_df.value_or(static_cast<double>(big_n) + 2.0);
  const Matrix psi = config.iw_scale.value_or(Matrix::Identity(big_n, big_n));
  const std::size_t n_samples = samples.size();

  std::vector<ColumnRef> columns;
  Index n_total = 0;
  for (std::size_t r = 0; r < n_samples; ++r) {
    for (Index i = 0; i < samples[r].y.cols(); ++i) columns.push_back({r, i});
    n_total += samples[r].y.cols();
  }

  // Chain state.
  ChainState state;
  state.hyper.log_theta = config.theta_init;
  state.lambda = Matrix::Identity(big_n, big_n);
  state.proposal_shape = config.proposal_shape_init;
  for (const auto& s : samples) state.chol.push_back(SparseCholesky::with_pattern(s.ordering.neighbors));
  Eigen::LLT<Matrix> lambda_llt = lambda_factor(state.lambda);

  std::vector<Matrix> whitened(n_samples);
  std::vector<std::vector<ColumnStats>> stats(n_samples);
  std::vector<Matrix> residuals(n_samples);  // columns r_i / sqrt(d_i)
  for (std::size_t r = 0; r < n_samples; ++r) {
    stats[r].resize(samples[r].y.cols());
    residuals[r].resize(big_n, samples[r].y.cols());
  }
  std::vector<double> terms(columns.size());

  const auto log_target = [&](const Vector& log_theta) -> double {
    HyperParams hp;
    hp.log_theta = log_theta;
    try {
      parallel_for(columns.size(), config.threads, [&](std::size_t c) {
        const auto [r, i] = columns[c];
        const auto& nb = samples[r].ordering.neighbors[i];
        const ColumnPrior prior =
            column_prior(hp, i + 1, samples[r].spatial_dim, static_cast<Index>(nb.size()));
        terms[c] = marginal_column_term(column_posterior(stats[r][i], prior, i), prior);
      });
    } catch (const NumericalError&) {
      return -std::numeric_limits<double>::infinity();
    }
    double total = 0.0;
    for (double t : terms) total += t;
    return total;
  };

  // Statistics for the initial Lambda.
  const auto refresh_stats = [&] {
    for (std::size_t r = 0; r < n_samples; ++r)
      whitened[r] = lambda_llt.matrixL().solve(samples[r].y);
    parallel_for(columns.size(), config.threads, [&](std::size_t c) {
      const auto [r, i] = columns[c];
      stats[r][i] = whitened_stats(whitened[r], i, samples[r].ordering.neighbors[i]);
    });
  };
  refresh_stats();
  const double initial_target = log_target(Vector(config.theta_init));
  if (!std::isfinite(initial_target)) {
    throw NumericalError("marginal likelihood is not finite at the initial hyperparameters");
  }
  AdaptiveMetropolis::Options am_options;
  am_options.target_acceptance = config.target_acceptance;
  am_options.adapt_until = config.burn_in;
  AdaptiveMetropolis metropolis(Vector(config.theta_init), initial_target,
                                Matrix(config.proposal_shape_init), am_options);

  PosteriorSamples out;
  out.theta_trace.reserve(config.iterations);
  out.loglik_trace.reserve(config.iterations);
  out.accepted.reserve(config.iterations);
  out.samples.resize(n_samples);
  out.lambda_mean = Matrix::Zero(big_n, big_n);
  out.lambda_inv_mean = Matrix::Zero(big_n, big_n);
  out.lambda_corr_mean = Matrix::Zero(big_n, big_n);
  std::vector<Matrix> col_corr_sum(n_samples);
  for (std::size_t r = 0; r < n_samples; ++r) {
    auto& summary = out.samples[r];
    const Index n = samples[r].y.cols();
    summary.order = samples[r].ordering.order;
    summary.neighbors = samples[r].ordering.neighbors;
    summary.u_mean.resize(n);
    for (Index i = 0; i < n; ++i)
      summary.u_mean[i] = Vector::Zero(static_cast<Index>(samples[r].ordering.neighbors[i].size()));
    summary.d_mean = Vector::Zero(n);
    if (config.summarize_columns) {
      check_desk_scale(n, DenseGate::desk_scale, "column correlation summary");
      col_corr_sum[r] = Matrix::Zero(n, n);
    }
  }

  const double two_pi_log = std::log(2.0 * std::numbers::pi);
  for (long t = 1; t <= config.iterations; ++t) {
    // (1) theta | Lambda, Y by adaptive Metropolis on log theta.
    if (t > 1) {
      refresh_stats();
      const double current = log_target(metropolis.position());
      if (!std::isfinite(current)) {
        throw NumericalError("iteration " + std::to_string(t) +
                             ": marginal likelihood is not finite at the current theta");
      }
      metropolis.refresh(current);
    }
    Rng theta_rng = Rng::stream(config.seed, StreamTag::theta_proposal, static_cast<std::uint64_t>(t));
    const auto step = metropolis.step(log_target, theta_rng, t);
    state.hyper.log_theta = metropolis.position();

    // (2) (u_i, d_i) | Y, Lambda, theta; columns are independent.
    parallel_for(columns.size(), config.threads, [&](std::size_t c) {
      const auto [r, i] = columns[c];
      const auto& nb = samples[r].ordering.neighbors[i];
      const ColumnPrior prior =
          column_prior(state.hyper, i + 1, samples[r].spatial_dim, static_cast<Index>(nb.size()));
      const ColumnPosterior post = column_posterior(stats[r][i], prior, i);
      Rng rng = Rng::stream(config.seed, StreamTag::column_update, static_cast<std::uint64_t>(t),
                            static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(i));
      ColumnDraw draw = sample_column(post, rng);
      Vector resid = samples[r].y.col(i);
      for (std::size_t j = 0; j < nb.size(); ++j) resid += draw.u(j) * samples[r].y.col(nb[j]);
      residuals[r].col(i) = resid / std::sqrt(draw.d);
      state.chol[r].values[i] = std::move(draw.u);
      state.chol[r].diag(i) = draw.d;
    });

    // (3) Lambda | Y, u, d pools the residuals of every sample.
    Matrix scale = psi;
    for (std::size_t r = 0; r < n_samples; ++r) scale.noalias() += residuals[r] * residuals[r].transpose();
    scale = 0.5 * (scale + scale.transpose());
    Rng lambda_rng = Rng::stream(config.seed, StreamTag::lambda_update, static_cast<std::uint64_t>(t));
    try {
      state.lambda = sample_inverse_wishart(static_cast<double>(n_total) + nu, scale, lambda_rng);
      lambda_llt = lambda_factor(state.lambda);
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(t) + ": Lambda update failed: " + e.what());
    }

    // Log-likelihood of the regression representation at the new state.
    const double logdet_lambda = 2.0 * lambda_llt.matrixLLT().diagonal().array().log().sum();
    double loglik = 0.0;
    for (std::size_t r = 0; r < n_samples; ++r) {
      const Index n = samples[r].y.cols();
      const double quad = lambda_llt.matrixL().solve(residuals[r]).squaredNorm();
      loglik += -0.5 * (static_cast<double>(big_n * n) * two_pi_log +
                        static_cast<double>(big_n) * state.chol[r].diag.array().log().sum() +
                        static_cast<double>(n) * logdet_lambda + quad);
    }
    state.loglik = loglik;
    state.iteration = t;
    state.proposal_shape = metropolis.proposal_shape();

    Eigen::Vector3d theta_nat = state.hyper.log_theta.array().exp();
    out.theta_trace.push_back(theta_nat);
    out.loglik_trace.push_back(loglik);
    out.accepted.push_back(step.accepted ? 1 : 0);

    if (t > config.burn_in) {
      const long k = t - config.burn_in;
      ++out.draws;
      if (config.keep_lambda_draws) out.lambda_draws.push_back(state.lambda);
      out.lambda_mean += state.lambda;
      out.lambda_inv_mean += lambda_llt.solve(Matrix::Identity(big_n, big_n));
      out.lambda_corr_mean += cov_to_corr(state.lambda);
      for (std::size_t r = 0; r < n_samples; ++r) {
        auto& summary = out.samples[r];
        const auto& chol = state.chol[r];
        for (Index i = 0; i < chol.size(); ++i) summary.u_mean[i] += chol.values[i];
        summary.d_mean += chol.diag;
        if (config.summarize_columns && k % config.column_summary_stride == 0) {
          col_corr_sum[r] += cov_to_corr(factor_to_covariance(chol));
          ++summary.col_corr_draws;
        }
        if (config.factor_stride > 0 && k % config.factor_stride == 0) {
          summary.factor_draws.push_back({t, chol});
        }
      }
    }
  }

  const double draws = static_cast<double>(out.draws);
  out.lambda_mean /= draws;
  out.lambda_inv_mean /= draws;
  out.lambda_corr_mean /= draws;
  for (std::size_t r = 0; r < n_samples; ++r) {
    auto& summary = out.samples[r];
    for (auto& u : summary.u_mean) u /= draws;
    summary.d_mean /= draws;
    if (config.summarize_columns && summary.col_corr_draws > 0) {
      const Matrix ordered = col_corr_sum[r] / static_cast<double>(summary.col_corr_draws);
      const auto& order = summary.order;
      const Index n = static_cast<Index>(order.size());
      summary.col_corr_mean.resize(n, n);
      for (Index a = 0; a < n; ++a)
        for (Index b = 0; b < n; ++b) summary.col_corr_mean(order[a], order[b]) = ordered(a, b);
    }
  }
  out.acceptance_rate = metropolis.acceptance_rate();
  out.nonfinite_rejections = metropolis.nonfinite_rejections();
  out.final_state = std::move(state);
  return out;
}

}  // namespace smn
