#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spatialmn/common.hpp"
#include "spatialmn/gibbs.hpp"
#include "spatialmn/kernels.hpp"
#include "spatialmn/random.hpp"

namespace smn {

enum class ScaleKind { ar, equi, banded };

std::string_view to_string(ScaleKind k);
ScaleKind scale_kind_from_string(std::string_view s);

/// AR: rho^{|i-j|}; Equi: 1 on the diagonal, rho elsewhere; Banded: 1 on the
/// diagonal, rho on the first off-diagonals. Throws when the result is not PD.
Matrix scale_matrix(ScaleKind kind, Index big_n, double rho);

/// Y = A Z B^T with A A^T = Lambda, B B^T = Sigma and Z iid standard normal.
Matrix sample_matrix_normal(const Matrix& lambda, const Matrix& sigma, Rng& rng);

/// |est - truth|_F / |truth|_F.
double relative_frobenius(const Matrix& est, const Matrix& truth);

struct KlMetrics {
  double kl_n = 0.0;   ///< KL(MN(0, Lambda, Sigma) || MN(0, I, Sigma_hat))
  double kl_mn = 0.0;  ///< KL(MN(0, Lambda, Sigma) || MN(0, Lambda_hat, Sigma_hat))
  /// Natural logs; a divergence of exactly zero (or a roundoff-negative one)
  /// is reported as -infinity and flagged as an exact fit.
  double kl_n_log = 0.0;
  double kl_mn_log = 0.0;
  bool kl_n_exact = false;
  bool kl_mn_exact = false;
};

KlMetrics kl_metrics(const Matrix& truth_lambda_corr, const Matrix& truth_sigma_corr,
                     const Matrix& est_lambda_corr, const Matrix& est_sigma_corr);

/// One cell of the simulation grid. A single entry in `n` runs the
/// single-sample sampler; several entries run the multi-sample sampler with
/// a shared row covariance. `kernels` may be left empty for the defaults
/// (Matern nu = 0.25, variance 1, range `range` for one sample; Matern
/// nu = 0.5, range 1, variances 1, 1.5, 2, ... for several).
struct SimScenario {
  Index big_n = 20;
  std::vector<Index> n{100};
  std::vector<KernelSpec> kernels;
  double range = 1.0;
  ScaleKind scale_kind = ScaleKind::ar;
  double rho = 0.5;
  /// Degrees of freedom of the inverse-Wishart truth for Lambda; unset means
  /// 2N - 1 (shape delta = N in Dawid's parameterization).
  std::optional<double> truth_iw_df;
  int replicates = 30;
  GibbsConfig gibbs;
  std::uint64_t seed = 1;
  /// Workers across replicates; each chain then runs with gibbs.threads.
  int threads = 1;

  bool multi() const { return n.size() > 1; }
  double resolved_truth_df() const;
  std::vector<KernelSpec> resolved_kernels() const;
  void validate() const;
};

struct SimMetrics {
  int replicate = 0;
  bool ok = false;
  std::string error;
  double kl_n_log = 0.0;  ///< single-sample only (NaN otherwise)
  double kl_mn_log = 0.0;
  double re_lambda = 0.0;
  std::vector<double> re_sigma;  ///< one per sample
  double acceptance_rate = 0.0;
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

struct ScenarioResult {
  std::vector<SimMetrics> rows;  ///< replicate order
  int failures = 0;
  MeanSd kl_n_log;
  MeanSd kl_mn_log;
  MeanSd re_lambda;
  std::vector<MeanSd> re_sigma;
};

/// Mean and sample standard deviation (n - 1 denominator; 0 for one value).
/// Non-finite values are skipped.
MeanSd mean_sd(const std::vector<double>& values);

/// Replicate r draws everything from substreams keyed by (seed, r), so the
/// table does not depend on `threads`. Failed replicates are recorded and
/// excluded from the summary.
ScenarioResult run_scenario(const SimScenario& scenario);

/// Per-replicate rows followed by "mean" and "sd" rows.
void write_scenario_csv(std::ostream& os, const SimScenario& scenario, const ScenarioResult& result);

}  // namespace smn
