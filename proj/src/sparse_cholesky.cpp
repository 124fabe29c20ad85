#include "spatialmn/sparse_cholesky.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spatialmn/parallel.hpp"

namespace smn {

void SparseCholesky::validate() const {
  const Index n = size();
  require(static_cast<Index>(rows.size()) == n && static_cast<Index>(values.size()) == n,
          "sparse factor: column count mismatch");
  for (Index i = 0; i < n; ++i) {
    require(static_cast<Index>(rows[i].size()) == values[i].size(),
            "sparse factor: column " + std::to_string(i) + " has mismatched index/value lengths");
    for (Index r : rows[i]) {
      require(r >= 0 && r < i, "sparse factor: column " + std::to_string(i) +
                                   " references row " + std::to_string(r) +
                                   " outside the strict upper triangle");
    }
    require(diag(i) > 0.0 && std::isfinite(diag(i)),
            "sparse factor: d_" + std::to_string(i) + " must be positive");
  }
}

SparseCholesky SparseCholesky::with_pattern(const std::vector<std::vector<Index>>& pattern) {
  SparseCholesky out;
  const Index n = static_cast<Index>(pattern.size());
  out.rows = pattern;
  out.values.resize(n);
  for (Index i = 0; i < n; ++i) out.values[i] = Vector::Zero(static_cast<Index>(pattern[i].size()));
  out.diag = Vector::Ones(n);
  return out;
}

void LowerFactor::validate() const {
  const Index n = size();
  require(static_cast<Index>(values.size()) == n, "lower factor: column count mismatch");
  for (Index i = 0; i < n; ++i) {
    require(!rows[i].empty() && rows[i].front() == i,
            "lower factor: column " + std::to_string(i) + " must start with its diagonal");
    require(static_cast<Index>(rows[i].size()) == values[i].size(),
            "lower factor: column " + std::to_string(i) + " has mismatched lengths");
    for (std::size_t k = 1; k < rows[i].size(); ++k) {
      require(rows[i][k] > i && rows[i][k] < n,
              "lower factor: column " + std::to_string(i) + " has an entry above the diagonal");
    }
  }
}

Matrix LowerFactor::dense() const {
  const Index n = size();
  Matrix out = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) out(rows[i][k], i) = values[i](k);
  }
  return out;
}

Matrix dense_unit_upper(const SparseCholesky& chol) {
  const Index n = chol.size();
  Matrix u = Matrix::Identity(n, n);
  for (Index i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < chol.rows[i].size(); ++k) u(chol.rows[i][k], i) = chol.values[i](k);
  }
  return u;
}

void solve_unit_upper(const SparseCholesky& chol, Eigen::Ref<Vector> b) {
  for (Index i = chol.size() - 1; i >= 0; --i) {
    const double xi = b(i);
    if (xi == 0.0) continue;
    const auto& rows = chol.rows[i];
    for (std::size_t k = 0; k < rows.size(); ++k) b(rows[k]) -= chol.values[i](k) * xi;
  }
}

void solve_unit_upper_transpose(const SparseCholesky& chol, Eigen::Ref<Vector> b) {
  for (Index i = 0; i < chol.size(); ++i) {
    const auto& rows = chol.rows[i];
    double acc = b(i);
    for (std::size_t k = 0; k < rows.size(); ++k) acc -= chol.values[i](k) * b(rows[k]);
    b(i) = acc;
  }
}

Matrix assemble_precision(const SparseCholesky& chol, DenseGate gate) {
  const Index n = chol.size();
  check_desk_scale(n, gate, "assemble_precision");
  chol.validate();
  // Column i of U contributes (U e_i)(U e_i)^T / d_i.
  Matrix prec = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto& rows = chol.rows[i];
    const double w = 1.0 / chol.diag(i);
    const Index k = static_cast<Index>(rows.size());
    for (Index a = -1; a < k; ++a) {
      const Index ra = a < 0 ? i : rows[a];
      const double va = a < 0 ? 1.0 : chol.values[i](a);
      for (Index b = -1; b < k; ++b) {
        const Index rb = b < 0 ? i : rows[b];
        const double vb = b < 0 ? 1.0 : chol.values[i](b);
        prec(ra, rb) += w * va * vb;
      }
    }
  }
  return prec;
}

Matrix factor_to_covariance(const SparseCholesky& chol, DenseGate gate) {
  const Index n = chol.size();
  check_desk_scale(n, gate, "factor_to_covariance");
  chol.validate();
  Matrix cov(n, n);
  Vector work(n);
  for (Index j = 0; j < n; ++j) {
    work.setZero();
    work(j) = 1.0;
    solve_unit_upper(chol, work);
    work.array() *= chol.diag.array();
    solve_unit_upper_transpose(chol, work);
    cov.col(j) = work;
  }
  return 0.5 * (cov + cov.transpose());
}

LowerFactor kl_optimal_factor(const Matrix& sigma, const std::vector<std::vector<Index>>& sets,
                              int threads) {
  const Index n = sigma.rows();
  require(sigma.cols() == n, "kl_optimal_factor: Sigma must be square");
  require(static_cast<Index>(sets.size()) == n, "kl_optimal_factor: one index set per column");
  LowerFactor out;
  out.rows = sets;
  out.values.resize(n);
  for (Index i = 0; i < n; ++i) {
    require(!sets[i].empty() && sets[i].front() == i,
            "kl_optimal_factor: set of column " + std::to_string(i) + " must start with " +
                std::to_string(i));
    for (std::size_t k = 1; k < sets[i].size(); ++k) {
      require(sets[i][k] > i && sets[i][k] < n,
              "kl_optimal_factor: set of column " + std::to_string(i) +
                  " must lie below the diagonal");
    }
  }
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t col) {
    const auto& s = sets[col];
    const Index k = static_cast<Index>(s.size());
    Matrix sub(k, k);
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b) sub(a, b) = sigma(s[a], s[b]);
    Eigen::LLT<Matrix> llt(sub);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("kl_optimal_factor: Sigma restricted to the set of column " +
                           std::to_string(col) + " is not positive definite");
    }
    Vector e1 = Vector::Zero(k);
    e1(0) = 1.0;
    const Vector x = llt.solve(e1);
    out.values[col] = x / std::sqrt(x(0));
  });
  return out;
}

SparseCholesky vecchia_factor(const Matrix& sigma, const std::vector<std::vector<Index>>& neighbors) {
  const Index n = sigma.rows();
  require(sigma.cols() == n && static_cast<Index>(neighbors.size()) == n,
          "vecchia_factor: dimension mismatch");
  SparseCholesky out;
  out.rows = neighbors;
  out.values.resize(n);
  out.diag.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto& g = neighbors[i];
    const Index k = static_cast<Index>(g.size());
    if (k == 0) {
      out.values[i] = Vector();
      out.diag(i) = sigma(i, i);
      continue;
    }
    Matrix sgg(k, k);
    Vector sgi(k);
    for (Index a = 0; a < k; ++a) {
      sgi(a) = sigma(g[a], i);
      for (Index b = 0; b < k; ++b) sgg(a, b) = sigma(g[a], g[b]);
    }
    Eigen::LLT<Matrix> llt(sgg);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("vecchia_factor: conditioning block of column " + std::to_string(i) +
                           " is not positive definite");
    }
    const Vector coef = llt.solve(sgi);
    out.values[i] = -coef;
    out.diag(i) = sigma(i, i) - sgi.dot(coef);
    if (!(out.diag(i) > 0.0)) {
      throw NumericalError("vecchia_factor: nonpositive conditional variance at column " +
                           std::to_string(i));
    }
  }
  return out;
}

SparseCholesky reversed_to_modified(const LowerFactor& lower) {
  lower.validate();
  const Index n = lower.size();
  SparseCholesky out;
  out.rows.resize(n);
  out.values.resize(n);
  out.diag.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Index col = n - 1 - i;
    const double lii = lower.values[i](0);
    require(lii != 0.0, "lower factor has a zero diagonal entry");
    const Index k = static_cast<Index>(lower.rows[i].size()) - 1;
    out.rows[col].resize(k);
    out.values[col].resize(k);
    for (Index a = 0; a < k; ++a) {
      out.rows[col][a] = n - 1 - lower.rows[i][a + 1];
      out.values[col](a) = lower.values[i](a + 1) / lii;
    }
    out.diag(col) = 1.0 / (lii * lii);
  }
  return out;
}

LowerFactor modified_to_reversed(const SparseCholesky& chol) {
  chol.validate();
  const Index n = chol.size();
  LowerFactor out;
  out.rows.resize(n);
  out.values.resize(n);
  for (Index col = 0; col < n; ++col) {
    const Index i = n - 1 - col;
    const double lii = 1.0 / std::sqrt(chol.diag(col));
    const Index k = static_cast<Index>(chol.rows[col].size());
    out.rows[i].resize(k + 1);
    out.values[i].resize(k + 1);
    out.rows[i][0] = i;
    out.values[i](0) = lii;
    for (Index a = 0; a < k; ++a) {
      out.rows[i][a + 1] = n - 1 - chol.rows[col][a];
      out.values[i](a + 1) = chol.values[col](a) * lii;
    }
  }
  return out;
}

}  // namespace smn
