#include "spatialmn/kernels.hpp"

#include <cmath>
#include <string>

namespace smn {

std::string_view to_string(KernelFamily f) {
  return f == KernelFamily::exponential ? "exponential" : "matern";
}

KernelFamily kernel_family_from_string(std::string_view s) {
  if (s == "exponential") return KernelFamily::exponential;
  if (s == "matern") return KernelFamily::matern;
  throw ValidationError("unknown kernel family '" + std::string(s) + "'");
}

void KernelSpec::validate() const {
  require(variance > 0.0 && std::isfinite(variance), "kernel variance must be positive");
  require(range > 0.0 && std::isfinite(range), "kernel range must be positive");
  require(smoothness > 0.0 && std::isfinite(smoothness), "kernel smoothness must be positive");
}

namespace {
void check_distance(double dist) {
  require(dist >= 0.0 && !std::isnan(dist), "kernel distance must be nonnegative");
}
}  // namespace

double exponential_cov(double dist, const KernelSpec& spec) {
  check_distance(dist);
  return spec.variance * std::exp(-dist / spec.range);
}

double matern_cov(double dist, const KernelSpec& spec) {
  check_distance(dist);
  if (dist == 0.0) return spec.variance;
  const double x = dist / spec.range;
  const double nu = spec.smoothness;
  if (x > 700.0) return 0.0;
  const double log_norm = (1.0 - nu) * std::log(2.0) - std::lgamma(nu);
  return spec.variance * std::exp(log_norm + nu * std::log(x)) * std::cyl_bessel_k(nu, x);
}

double kernel_cov(double dist, const KernelSpec& spec) {
  return spec.family == KernelFamily::exponential ? exponential_cov(dist, spec)
                                                  : matern_cov(dist, spec);
}

Matrix covariance_matrix(const LocationSet& locs, const KernelSpec& spec, double jitter,
                         DenseGate gate) {
  spec.validate();
  require(jitter >= 0.0, "jitter must be nonnegative");
  const Matrix dist = pairwise_distances(locs, gate);
  const Index n = locs.size();
  Matrix cov(n, n);
  for (Index j = 0; j < n; ++j) {
    cov(j, j) = spec.variance + jitter;
    for (Index i = j + 1; i < n; ++i) {
      const double v = kernel_cov(dist(i, j), spec);
      if (!std::isfinite(v)) throw NumericalError("non-finite kernel value");
      cov(i, j) = v;
      cov(j, i) = v;
    }
  }
  return cov;
}

}  // namespace smn
