#pragma once

#include <utility>

#include "spatialmn/common.hpp"

namespace smn {

/// MN_{N,n}(M, Lambda, Sigma): vec(Y) ~ N(vec(M), Sigma (x) Lambda).
/// An empty mean is read as zero.
struct MatrixNormalParams {
  Matrix mean;
  Matrix row_cov;
  Matrix col_cov;

  Index rows() const { return row_cov.rows(); }
  Index cols() const { return col_cov.rows(); }
};

/// log|A| for SPD A via Cholesky; throws NumericalError otherwise.
double logdet_spd(const Matrix& a, const char* what = "matrix");

double matnorm_logpdf(const Matrix& y, const MatrixNormalParams& params);

/// KL(N(0, s1) || N(0, s2)).
double kl_mvn(const Matrix& s1, const Matrix& s2);

/// KL(P || Q) between centered matrix-normals, using
/// tr(A (x) B) = tr(A) tr(B) so the Kronecker product is never formed.
double kl_matnorm(const MatrixNormalParams& p, const MatrixNormalParams& q);

/// C_ij = A_ij / sqrt(A_ii A_jj).
Matrix cov_to_corr(const Matrix& a);

struct RowIgnoranceKl {
  double kl_ignoring_rows;  ///< KL(MN(0, Lambda, Sigma) || MN(0, I, (L L^T)^{-1}))
  double kl_with_rows;      ///< KL(MN(0, Lambda, Sigma) || MN(0, Lambda, (L L^T)^{-1}))
  /// (tr(Lambda) - N) tr(L L^T Sigma) - n log|Lambda|, halved: the closed-form
  /// gap between the two divergences.
  double predicted_gap;
};

RowIgnoranceKl row_ignorance_kl_pair(const Matrix& lambda, const Matrix& sigma,
                                     const Matrix& lower);

}  // namespace smn
