#include "spatialmn/simulation.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "spatialmn/matnorm.hpp"
#include "spatialmn/parallel.hpp"
#include "spatialmn/spatial.hpp"

namespace smn {

std::string_view to_string(ScaleKind k) {
  switch (k) {
    case ScaleKind::ar: return "AR";
    case ScaleKind::equi: return "Equi";
    case ScaleKind::banded: return "Banded";
  }
  return "AR";
}

ScaleKind scale_kind_from_string(std::string_view s) {
  std::string lower(s);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "ar") return ScaleKind::ar;
  if (lower == "equi") return ScaleKind::equi;
  if (lower == "banded") return ScaleKind::banded;
  throw ValidationError("unknown scale matrix kind '" + std::string(s) + "' (AR, Equi, Banded)");
}

Matrix scale_matrix(ScaleKind kind, Index big_n, double rho) {
  require(big_n >= 1, "scale matrix needs N >= 1");
  require(rho > -1.0 && rho < 1.0, "rho must lie in (-1, 1)");
  Matrix psi = Matrix::Identity(big_n, big_n);
  for (Index i = 0; i < big_n; ++i) {
    for (Index j = 0; j < big_n; ++j) {
      if (i == j) continue;
      const Index lag = std::abs(i - j);
      switch (kind) {
        case ScaleKind::ar: psi(i, j) = std::pow(rho, static_cast<double>(lag)); break;
        case ScaleKind::equi: psi(i, j) = rho; break;
        case ScaleKind::banded: psi(i, j) = lag == 1 ? rho : 0.0; break;
      }
    }
  }
  Eigen::LLT<Matrix> llt(psi);
  if (llt.info() != Eigen::Success) {
    throw ValidationError(std::string(to_string(kind)) + " scale matrix with N = " +
                          std::to_string(big_n) + ", rho = " + std::to_string(rho) +
                          " is not positive definite");
  }
  return psi;
}

Matrix sample_matrix_normal(const Matrix& lambda, const Matrix& sigma, Rng& rng) {
  Eigen::LLT<Matrix> a(lambda);
  Eigen::LLT<Matrix> b(sigma);
  if (a.info() != Eigen::Success) throw NumericalError("row covariance is not positive definite");
  if (b.info() != Eigen::Success) throw NumericalError("column covariance is not positive definite");
  Matrix z(lambda.rows(), sigma.rows());
  for (Index j = 0; j < z.cols(); ++j)
    for (Index i = 0; i < z.rows(); ++i) z(i, j) = rng.normal();
  const Matrix lower_b = b.matrixL();
  return a.matrixL() * z * lower_b.transpose();
}

double relative_frobenius(const Matrix& est, const Matrix& truth) {
  require(est.rows() == truth.rows() && est.cols() == truth.cols(),
          "relative_frobenius: shape mismatch");
  const double denom = truth.norm();
  require(denom > 0.0, "relative_frobenius: truth has zero norm");
  return (est - truth).norm() / denom;
}

KlMetrics kl_metrics(const Matrix& truth_lambda_corr, const Matrix& truth_sigma_corr,
                     const Matrix& est_lambda_corr, const Matrix& est_sigma_corr) {
  const Index big_n = truth_lambda_corr.rows();
  const MatrixNormalParams truth{Matrix(), truth_lambda_corr, truth_sigma_corr};
  const MatrixNormalParams ignore{Matrix(), Matrix::Identity(big_n, big_n), est_sigma_corr};
  const MatrixNormalParams full{Matrix(), est_lambda_corr, est_sigma_corr};
  KlMetrics out;
  out.kl_n = kl_matnorm(truth, ignore);
  out.kl_mn = kl_matnorm(truth, full);
  const auto safe_log = [](double v, bool& exact) {
    exact = !(v > 0.0);
    return exact ? -std::numeric_limits<double>::infinity() : std::log(v);
  };
  out.kl_n_log = safe_log(out.kl_n, out.kl_n_exact);
  out.kl_mn_log = safe_log(out.kl_mn, out.kl_mn_exact);
  return out;
}

std::vector<KernelSpec> SimScenario::resolved_kernels() const {
  if (!kernels.empty()) return kernels;
  std::vector<KernelSpec> out;
  if (!multi()) {
    out.push_back({KernelFamily::matern, 1.0, range, 0.25});
  } else {
    for (std::size_t r = 0; r < n.size(); ++r)
      out.push_back({KernelFamily::matern, 1.0 + 0.5 * static_cast<double>(r), 1.0, 0.5});
  }
  return out;
}

double SimScenario::resolved_truth_df() const {
  return truth_iw_df.value_or(2.0 * static_cast<double>(big_n) - 1.0);
}

void SimScenario::validate() const {
  require(big_n >= 1, "scenario N must be positive");
  require(!n.empty(), "scenario needs at least one sample size");
  for (Index v : n) require(v >= 2, "each sample needs at least two locations");
  require(kernels.empty() || kernels.size() == n.size(), "one kernel per sample is required");
  for (const auto& k : resolved_kernels()) k.validate();
  require(replicates >= 1, "replicates must be positive");
  require(threads >= 1, "threads must be positive");
  require(range > 0.0, "range must be positive");
  require(resolved_truth_df() >= static_cast<double>(big_n), "truth inverse-Wishart df must be >= N");
  scale_matrix(scale_kind, big_n, rho);
  gibbs.validate(big_n);
}

MeanSd mean_sd(const std::vector<double>& values) {
  double sum = 0.0;
  std::size_t count = 0;
  for (double v : values)
    if (std::isfinite(v)) {
      sum += v;
      ++count;
    }
  MeanSd out;
  if (count == 0) {
    out.mean = std::numeric_limits<double>::quiet_NaN();
    out.sd = out.mean;
    return out;
  }
  out.mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (double v : values)
    if (std::isfinite(v)) ss += (v - out.mean) * (v - out.mean);
  out.sd = count > 1 ? std::sqrt(ss / static_cast<double>(count - 1)) : 0.0;
  return out;
}

namespace {

SimMetrics run_replicate(const SimScenario& sc, const std::vector<KernelSpec>& kernels,
                         const Matrix& psi, int replicate) {
  SimMetrics row;
  row.replicate = replicate;
  Rng rng = Rng::stream(sc.seed, StreamTag::simulation, static_cast<std::uint64_t>(replicate));
  const std::size_t n_samples = sc.n.size();

  const Matrix lambda = sample_inverse_wishart(sc.resolved_truth_df(), psi, rng);
  std::vector<Matrix> sigma(n_samples);
  std::vector<OrderedSample> data;
  for (std::size_t r = 0; r < n_samples; ++r) {
    Matrix coords(sc.n[r], 2);
    for (Index i = 0; i < sc.n[r]; ++i) {
      coords(i, 0) = rng.uniform();
      coords(i, 1) = rng.uniform();
    }
    const LocationSet locs(coords);
    sigma[r] = covariance_matrix(locs, kernels[r], 1e-8 * kernels[r].variance);
    const Matrix y = sample_matrix_normal(lambda, sigma[r], rng);
    data.push_back(prepare_sample(y, locs, sc.gibbs.m));
  }

  GibbsConfig cfg = sc.gibbs;
  cfg.seed = Rng::stream(sc.seed, StreamTag::generic, static_cast<std::uint64_t>(replicate))();
  cfg.keep_lambda_draws = false;
  cfg.factor_stride = 0;
  cfg.summarize_columns = true;
  const PosteriorSamples post = run_gibbs_multi(data, cfg);

  const Matrix lambda_corr = cov_to_corr(lambda);
  row.re_lambda = relative_frobenius(post.lambda_corr_mean, lambda_corr);
  std::vector<Matrix> sigma_corr(n_samples);
  for (std::size_t r = 0; r < n_samples; ++r) {
    sigma_corr[r] = cov_to_corr(sigma[r]);
    row.re_sigma.push_back(relative_frobenius(post.samples[r].col_corr_mean, sigma_corr[r]));
  }
  if (n_samples == 1) {
    const KlMetrics kl =
        kl_metrics(lambda_corr, sigma_corr[0], post.lambda_corr_mean, post.samples[0].col_corr_mean);
    row.kl_n_log = kl.kl_n_log;
    row.kl_mn_log = kl.kl_mn_log;
  } else {
    row.kl_n_log = std::numeric_limits<double>::quiet_NaN();
    row.kl_mn_log = row.kl_n_log;
  }
  row.acceptance_rate = post.acceptance_rate;
  row.ok = true;
  return row;
}

}  // namespace

ScenarioResult run_scenario(const SimScenario& scenario) {
  scenario.validate();
  const auto kernels = scenario.resolved_kernels();
  const Matrix psi = scale_matrix(scenario.scale_kind, scenario.big_n, scenario.rho);
  ScenarioResult out;
  out.rows.resize(static_cast<std::size_t>(scenario.replicates));
  parallel_for(out.rows.size(), scenario.threads, [&](std::size_t r) {
    try {
      out.rows[r] = run_replicate(scenario, kernels, psi, static_cast<int>(r));
    } catch (const std::exception& e) {
      out.rows[r] = SimMetrics{};
      out.rows[r].replicate = static_cast<int>(r);
      out.rows[r].error = e.what();
    }
  });
  std::vector<double> kl_n, kl_mn, re_l;
  std::vector<std::vector<double>> re_s(scenario.n.size());
  for (const auto& row : out.rows) {
    if (!row.ok) {
      ++out.failures;
      continue;
    }
    kl_n.push_back(row.kl_n_log);
    kl_mn.push_back(row.kl_mn_log);
    re_l.push_back(row.re_lambda);
    for (std::size_t s = 0; s < row.re_sigma.size(); ++s) re_s[s].push_back(row.re_sigma[s]);
  }
  out.kl_n_log = mean_sd(kl_n);
  out.kl_mn_log = mean_sd(kl_mn);
  out.re_lambda = mean_sd(re_l);
  for (const auto& v : re_s) out.re_sigma.push_back(mean_sd(v));
  return out;
}

void write_scenario_csv(std::ostream& os, const SimScenario& sc, const ScenarioResult& result) {
  const std::size_t n_samples = sc.n.size();
  std::string n_label;
  for (std::size_t r = 0; r < n_samples; ++r) n_label += (r ? ";" : "") + std::to_string(sc.n[r]);
  os << "row,status,N,n,scale,rho,kl_n_log,kl_mn_log,re_lambda";
  for (std::size_t r = 0; r < n_samples; ++r) os << ",re_sigma_" << (r + 1);
  os << ",acceptance_rate\n";
  const auto prefix = [&](const std::string& row, const std::string& status) {
    os << row << ',' << status << ',' << sc.big_n << ',' << n_label << ',' << to_string(sc.scale_kind)
       << ',' << sc.rho;
  };
  os.precision(17);
  for (const auto& row : result.rows) {
    std::string status = row.ok ? "ok" : "failed";
    prefix(std::to_string(row.replicate + 1), status);
    if (!row.ok) {
      os << ",,,";
      for (std::size_t r = 0; r < n_samples; ++r) os << ',';
      os << ",\n";
      continue;
    }
    os << ',' << row.kl_n_log << ',' << row.kl_mn_log << ',' << row.re_lambda;
    for (double v : row.re_sigma) os << ',' << v;
    os << ',' << row.acceptance_rate << '\n';
  }
  prefix("mean", "summary");
  os << ',' << result.kl_n_log.mean << ',' << result.kl_mn_log.mean << ',' << result.re_lambda.mean;
  for (const auto& v : result.re_sigma) os << ',' << v.mean;
  os << ",\n";
  prefix("sd", "summary");
  os << ',' << result.kl_n_log.sd << ',' << result.kl_mn_log.sd << ',' << result.re_lambda.sd;
  for (const auto& v : result.re_sigma) os << ',' << v.sd;
  os << ",\n";
}

}  // namespace smn
