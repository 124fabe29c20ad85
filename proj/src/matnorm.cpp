#include "spatialmn/matnorm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace smn {

namespace {

Eigen::LLT<Matrix> spd_factor(const Matrix& a, const char* what) {
  require(a.rows() == a.cols(), std::string(what) + " must be square");
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + " is not symmetric positive definite");
  }
  return llt;
}

double logdet_from(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

double logdet_spd(const Matrix& a, const char* what) { return logdet_from(spd_factor(a, what)); }

double matnorm_logpdf(const Matrix& y, const MatrixNormalParams& params) {
  const Index big_n = params.rows();
  const Index n = params.cols();
  require(y.rows() == big_n && y.cols() == n, "matnorm_logpdf: Y dimensions do not match");
  const auto row_llt = spd_factor(params.row_cov, "row covariance");
  const auto col_llt = spd_factor(params.col_cov, "column covariance");
  Matrix centered = y;
  if (params.mean.size() != 0) {
    require(params.mean.rows() == big_n && params.mean.cols() == n, "mean dimensions differ");
    centered -= params.mean;
  }
  // tr(Sigma^{-1} E^T Lambda^{-1} E) = || L_row^{-1} E L_col^{-T} ||_F^2
  Matrix white = row_llt.matrixL().solve(centered);
  white = col_llt.matrixL().solve(white.transpose()).eval();
  const double quad = white.squaredNorm();
  const double nn = static_cast<double>(big_n * n);
  return -0.5 * (nn * std::log(2.0 * std::numbers::pi) + static_cast<double>(big_n) * logdet_from(col_llt) +
                 static_cast<double>(n) * logdet_from(row_llt) + quad);
}

double kl_mvn(const Matrix& s1, const Matrix& s2) {
  require(s1.rows() == s2.rows() && s1.cols() == s2.cols(), "kl_mvn: dimension mismatch");
  const auto llt1 = spd_factor(s1, "first covariance");
  const auto llt2 = spd_factor(s2, "second covariance");
  const double trace = llt2.solve(s1).trace();
  const double n = static_cast<double>(s1.rows());
  return 0.5 * (trace + logdet_from(llt2) - logdet_from(llt1) - n);
}

double kl_matnorm(const MatrixNormalParams& p, const MatrixNormalParams& q) {
  require(p.rows() == q.rows() && p.cols() == q.cols(), "kl_matnorm: dimension mismatch");
  for (const auto* m : {&p.mean, &q.mean}) {
    require(m->size() == 0 || m->isZero(0.0), "kl_matnorm: distributions must be centered");
  }
  const auto sp = spd_factor(p.col_cov, "P column covariance");
  const auto sq = spd_factor(q.col_cov, "Q column covariance");
  const auto lp = spd_factor(p.row_cov, "P row covariance");
  const auto lq = spd_factor(q.row_cov, "Q row covariance");
  const double big_n = static_cast<double>(p.rows());
  const double n = static_cast<double>(p.cols());
  const double tr_col = sq.solve(p.col_cov).trace();
  const double tr_row = lq.solve(p.row_cov).trace();
  return 0.5 * (tr_col * tr_row - big_n * (logdet_from(sp) - logdet_from(sq)) -
                n * (logdet_from(lp) - logdet_from(lq)) - big_n * n);
}

Matrix cov_to_corr(const Matrix& a) {
  require(a.rows() == a.cols(), "cov_to_corr: matrix must be square");
  const Index n = a.rows();
  Vector inv_sd(n);
  for (Index i = 0; i < n; ++i) {
    if (!(a(i, i) > 0.0)) {
      throw ValidationError("cov_to_corr: nonpositive diagonal entry at " + std::to_string(i));
    }
    inv_sd(i) = 1.0 / std::sqrt(a(i, i));
  }
  Matrix c = inv_sd.asDiagonal() * a * inv_sd.asDiagonal();
  for (Index i = 0; i < n; ++i) {
    c(i, i) = 1.0;
    for (Index j = 0; j < i; ++j) {
      const double v = std::clamp(0.5 * (c(i, j) + c(j, i)), -1.0, 1.0);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

RowIgnoranceKl row_ignorance_kl_pair(const Matrix& lambda, const Matrix& sigma,
                                     const Matrix& lower) {
  const Index n = sigma.rows();
  const Index big_n = lambda.rows();
  require(lower.rows() == n && lower.cols() == n, "row_ignorance_kl_pair: factor dimension");
  const Matrix precision = lower * lower.transpose();
  const Matrix approx_cov = spd_factor(precision, "L L^T").solve(Matrix::Identity(n, n));
  const MatrixNormalParams truth{Matrix(), lambda, sigma};
  const MatrixNormalParams ignore{Matrix(), Matrix::Identity(big_n, big_n), approx_cov};
  const MatrixNormalParams with_rows{Matrix(), lambda, approx_cov};
  RowIgnoranceKl out{};
  out.kl_ignoring_rows = kl_matnorm(truth, ignore);
  out.kl_with_rows = kl_matnorm(truth, with_rows);
  const double eps = (precision * sigma).trace();
  out.predicted_gap = 0.5 * ((lambda.trace() - static_cast<double>(big_n)) * eps -
                             static_cast<double>(n) * logdet_spd(lambda, "Lambda"));
  return out;
}

}  // namespace smn
