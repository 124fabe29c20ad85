#include "spatialmn/simd.hpp"

namespace smn::simd {
namespace {

void sq_dist_to_point_scalar(const PointsSoA& pts, const double* query, double* out) {
  const std::size_t dims = pts.axis.size();
  for (std::size_t j = 0; j < pts.count; ++j) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      const double diff = pts.axis[d][j] - query[d];
      acc = acc + diff * diff;
    }
    out[j] = acc;
  }
}

void min_sq_dist_update_scalar(const PointsSoA& pts, const double* query, double* mins) {
  const std::size_t dims = pts.axis.size();
  for (std::size_t j = 0; j < pts.count; ++j) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      const double diff = pts.axis[d][j] - query[d];
      acc = acc + diff * diff;
    }
    if (acc < mins[j]) mins[j] = acc;
  }
}

std::size_t argmax_first_scalar(const double* v, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (v[j] > v[best]) best = j;
  }
  return best;
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{Isa::scalar, &sq_dist_to_point_scalar, &min_sq_dist_update_scalar,
                               &argmax_first_scalar};
}  // namespace detail

}  // namespace smn::simd
