#pragma once

#include <string_view>

#include "spatialmn/common.hpp"
#include "spatialmn/spatial.hpp"

namespace smn {

enum class KernelFamily { exponential, matern };

std::string_view to_string(KernelFamily f);
KernelFamily kernel_family_from_string(std::string_view s);

/// Stationary isotropic covariance kernel.
///
/// Both families treat `range` as a length-scale r:
///   exponential  K(d) = variance * exp(-d / r)
///   matern       K(d) = variance * 2^{1-nu} / Gamma(nu) * (d/r)^nu * K_nu(d/r)
/// with K_nu the modified Bessel function of the second kind. The Matern
/// form reduces to the exponential one at nu = 1/2.
struct KernelSpec {
  KernelFamily family = KernelFamily::exponential;
  double variance = 1.0;
  double range = 1.0;
  double smoothness = 0.5;

  void validate() const;
};

double exponential_cov(double dist, const KernelSpec& spec);
double matern_cov(double dist, const KernelSpec& spec);
/// Dispatches on spec.family.
double kernel_cov(double dist, const KernelSpec& spec);

/// Dense covariance over all location pairs, with `jitter` added to the diagonal.
Matrix covariance_matrix(const LocationSet& locs, const KernelSpec& spec, double jitter = 0.0,
                         DenseGate gate = DenseGate::desk_scale);

}  // namespace smn
