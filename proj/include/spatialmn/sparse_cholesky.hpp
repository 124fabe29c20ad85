#pragma once

#include <vector>

#include "spatialmn/common.hpp"

namespace smn {

/// Modified Cholesky factor of a column precision, Sigma^{-1} = U D^{-1} U^T,
/// with U unit upper triangular. Column i of U holds ones on the diagonal
/// and `values[i]` at rows `rows[i]` (all < i); D = diag(diag).
///
/// Under a maximin ordering, rows[i] is the conditioning set of rank i and
///   y_i | y_rows ~ N(-sum_j values[i][j] y_rows[j], diag[i]).
struct SparseCholesky {
  std::vector<std::vector<Index>> rows;
  std::vector<Vector> values;
  Vector diag;

  Index size() const { return diag.size(); }
  void validate() const;

  /// Identity factor with the given sparsity pattern and zero off-diagonals.
  static SparseCholesky with_pattern(const std::vector<std::vector<Index>>& pattern);
};

/// Lower-triangular factor L with Sigma^{-1} ~ L L^T. Column i has nonzeros
/// at rows[i], whose first entry is i itself (the diagonal) and whose
/// remaining entries are > i.
struct LowerFactor {
  std::vector<std::vector<Index>> rows;
  std::vector<Vector> values;

  Index size() const { return static_cast<Index>(rows.size()); }
  void validate() const;
  Matrix dense() const;
};

Matrix dense_unit_upper(const SparseCholesky& chol);

/// Solves U x = b in place (back substitution over the sparse columns).
void solve_unit_upper(const SparseCholesky& chol, Eigen::Ref<Vector> b);
/// Solves U^T x = b in place (forward substitution).
void solve_unit_upper_transpose(const SparseCholesky& chol, Eigen::Ref<Vector> b);

/// Dense U D^{-1} U^T.
Matrix assemble_precision(const SparseCholesky& chol, DenseGate gate = DenseGate::desk_scale);

/// Dense U^{-T} D U^{-1}, built column by column with two sparse
/// triangular solves each; U^{-1} is never formed.
Matrix factor_to_covariance(const SparseCholesky& chol, DenseGate gate = DenseGate::desk_scale);

/// KL-optimal lower factor for the given sparsity: column i equals
/// Sigma_{s,s}^{-1} e_1 / sqrt(e_1^T Sigma_{s,s}^{-1} e_1) on s = rows[i].
/// Columns are independent; `threads` only affects wall time.
LowerFactor kl_optimal_factor(const Matrix& sigma, const std::vector<std::vector<Index>>& sets,
                              int threads = 1);

/// Same optimum in the sampler's (U, D) convention for a maximin-ordered
/// Sigma and conditioning sets: u_i = -Sigma_gg^{-1} Sigma_gi and
/// d_i = Sigma_ii - Sigma_ig Sigma_gg^{-1} Sigma_gi.
SparseCholesky vecchia_factor(const Matrix& sigma, const std::vector<std::vector<Index>>& neighbors);

/// Relabels a lower factor by index reversal k -> n-1-k. The result is the
/// (U, D) factor of the reversed matrix: if L L^T = Sigma^{-1} then the
/// returned factor satisfies U D^{-1} U^T = P Sigma^{-1} P with P the
/// reversal permutation.
SparseCholesky reversed_to_modified(const LowerFactor& lower);

/// Reverse of reversed_to_modified.
LowerFactor modified_to_reversed(const SparseCholesky& chol);

}  // namespace smn
