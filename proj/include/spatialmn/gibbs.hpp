#pragma once

// Blocked Gibbs sampler for Y ~ MN(0, Lambda, Sigma) with the column
// precision written as Sigma^{-1} = U D^{-1} U^T over a maximin ordering.
//
// Each column i of the ordered data is a regression on its conditioning set,
//   y_i | y_g(i) ~ N_N(X_i u_i, d_i Lambda),   X_i = -Y[:, g(i)],
// with conjugate priors
//   u_i | d_i ~ N(0, d_i V_i),  d_i ~ IG(alpha_i, beta_i),  Lambda ~ IW(nu, Psi),
// and (alpha_i, beta_i, V_i) tied to three hyperparameters theta:
//   alpha_i = 6,  beta_i = 5 theta1 f(i),  f(i) = 1 - exp(-theta2 i^{-1/p}),
//   V_i = diag(exp(-theta3 j / f(i))), j = 1..|g(i)|,
// where i is the 1-based rank. theta is updated by adaptive Metropolis on
// log theta against the marginal likelihood with (u_i, d_i) integrated out.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "spatialmn/adaptive_metropolis.hpp"
#include "spatialmn/common.hpp"
#include "spatialmn/random.hpp"
#include "spatialmn/sparse_cholesky.hpp"
#include "spatialmn/spatial.hpp"

namespace smn {

struct HyperParams {
  Eigen::Vector3d log_theta{1.0, -1.0, 0.0};

  double theta(int k) const { return std::exp(log_theta(k)); }
};

struct ColumnPrior {
  double alpha = 6.0;
  double beta = 0.0;
  Vector v_diag;
};

/// Prior of the column with 1-based rank `rank` in spatial dimension `p`
/// with `m_i` conditioning neighbours. Throws NumericalError when beta is
/// not a positive finite number (e.g. theta2 underflows to zero).
ColumnPrior column_prior(const HyperParams& hyper, Index rank, int p, Index m_i);

/// N x m_i matrix whose columns are the negated neighbour columns of Y.
Matrix design_matrix(const Matrix& y_ordered, const std::vector<Index>& neighbors);

/// Quadratic summaries of one column under a fixed Lambda:
///   gram = X^T Lambda^{-1} X,  h = X^T Lambda^{-1} y,  yy = y^T Lambda^{-1} y.
struct ColumnStats {
  Matrix gram;
  Vector h;
  double yy = 0.0;
  Index rows = 0;  ///< N, the number of genes
};

ColumnStats column_stats(const Vector& y, const Matrix& x, const Matrix& lambda_inv);

/// Normal-inverse-gamma full conditional of (u_i, d_i):
///   u_i | d_i ~ N(G^{-1} H, d_i G^{-1}),  d_i ~ IG(alpha_tilde, beta_tilde).
struct ColumnPosterior {
  Matrix g_inv;
  Matrix g_chol;  ///< lower Cholesky factor of G = V^{-1} + X^T Lambda^{-1} X
  Vector h;
  Vector mean;    ///< G^{-1} H
  double alpha_tilde = 0.0;
  double beta_tilde = 0.0;
  double logdet_g_inv = 0.0;
};

ColumnPosterior column_posterior(const ColumnStats& stats, const ColumnPrior& prior,
                                 Index column = -1);
ColumnPosterior column_posterior(const Vector& y, const Matrix& x, const Matrix& lambda_inv,
                                 const ColumnPrior& prior);

struct ColumnDraw {
  Vector u;
  double d = 0.0;
};

/// d ~ IG(alpha_tilde, beta_tilde), then u ~ N(G^{-1}H, d G^{-1}).
ColumnDraw sample_column(const ColumnPosterior& post, Rng& rng);

/// Parameters of the Lambda full conditional IW(scale, df):
/// scale = Psi + sum_i r_i r_i^T / d_i, df = n + nu, with r_i the columns of
/// `residuals` and n the number of columns.
struct LambdaPosterior {
  Matrix scale;
  double df = 0.0;
};

LambdaPosterior lambda_posterior(const Matrix& residuals, const Vector& d, const Matrix& psi, double nu);

/// One draw from the conditional above.
Matrix sample_lambda(const Matrix& residuals, const Vector& d, const Matrix& psi, double nu,
                     Rng& rng);

/// Log marginal-likelihood contribution of one column (constants shared by
/// all theta dropped): 1/2 log|G^{-1}| - 1/2 log|V| + alpha log beta
/// - alpha_tilde log beta_tilde + lgamma(alpha_tilde) - lgamma(alpha).
double marginal_column_term(const ColumnPosterior& post, const ColumnPrior& prior);

/// log p(Y | Lambda, theta) up to terms free of theta.
double marginal_loglik_theta(const Matrix& y_ordered, const std::vector<std::vector<Index>>& neighbors,
                             const Matrix& lambda, const HyperParams& hyper, int p);

/// The theta-free terms dropped above: -(N n / 2) log(2 pi) - (n / 2) log|Lambda|.
double marginal_loglik_constant(Index big_n, Index n, const Matrix& lambda);

/// sum_i log N_N(y_i | X_i u_i, d_i Lambda) for a factor over the given
/// neighbour sets (the sampler's log-likelihood trace).
double regression_loglik(const Matrix& y_ordered, const SparseCholesky& chol, const Matrix& lambda);

/// One spatial sample prepared for the sampler: data columns permuted into
/// maximin order together with their conditioning sets.
struct OrderedSample {
  Matrix y;                 ///< N x n, columns in maximin order
  MaximinOrdering ordering;
  LocationSet ordered_locations;
  int spatial_dim = 2;
};

OrderedSample prepare_sample(const Matrix& y, const LocationSet& locs, Index m);

struct GibbsConfig {
  Index m = 10;
  long iterations = 2000;
  long burn_in = 1000;
  std::uint64_t seed = 1;
  /// Inverse-Wishart prior; defaults (nu = N + 2, Psi = I) applied when unset.
  std::optional<double> iw_df;
  std::optional<Matrix> iw_scale;
  Eigen::Vector3d theta_init{1.0, -1.0, 0.0};  ///< on the log scale
  Eigen::Matrix3d proposal_shape_init = default_proposal_shape();
  double target_acceptance = 0.234;
  int threads = 1;
  /// Keep every k-th post-burn-in factor draw (0 disables).
  long factor_stride = 100;
  /// Average per-draw column correlation matrices (dense n x n per sample).
  bool summarize_columns = true;
  long column_summary_stride = 1;
  bool keep_lambda_draws = true;

  static Eigen::Matrix3d default_proposal_shape();
  void validate(Index big_n) const;
};

struct ChainState {
  HyperParams hyper;
  Matrix lambda;
  std::vector<SparseCholesky> chol;  ///< one factor per sample
  double loglik = 0.0;
  long iteration = 0;
  Eigen::Matrix3d proposal_shape;
};

struct FactorDraw {
  long iteration = 0;
  SparseCholesky chol;
};

struct SampleSummary {
  std::vector<Index> order;
  std::vector<std::vector<Index>> neighbors;
  std::vector<Vector> u_mean;
  Vector d_mean;
  Matrix col_corr_mean;  ///< in original (unordered) cell order; empty if not summarized
  long col_corr_draws = 0;
  std::vector<FactorDraw> factor_draws;
};

struct PosteriorSamples {
  std::vector<Eigen::Vector3d> theta_trace;  ///< natural scale, every iteration
  std::vector<double> loglik_trace;
  std::vector<char> accepted;
  std::vector<Matrix> lambda_draws;          ///< post burn-in
  Matrix lambda_mean;
  Matrix lambda_inv_mean;
  Matrix lambda_corr_mean;
  std::vector<SampleSummary> samples;
  long draws = 0;
  double acceptance_rate = 0.0;
  long nonfinite_rejections = 0;
  ChainState final_state;
};

/// Single-sample sampler; identical to run_gibbs_multi with one sample.
PosteriorSamples run_gibbs(const OrderedSample& sample, const GibbsConfig& config);

/// Shared Lambda and theta across samples; each sample keeps its own
/// (u, d). All samples must have the same number of rows.
PosteriorSamples run_gibbs_multi(const std::vector<OrderedSample>& samples,
                                 const GibbsConfig& config);

}  // namespace smn
