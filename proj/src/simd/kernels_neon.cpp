#include "spatialmn/simd.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace smn::simd {
namespace {

inline float64x2_t sq_dist2(const PointsSoA& pts, const double* query, std::size_t j) {
  float64x2_t acc = vdupq_n_f64(0.0);
  for (std::size_t d = 0; d < pts.axis.size(); ++d) {
    const float64x2_t diff = vsubq_f64(vld1q_f64(pts.axis[d] + j), vdupq_n_f64(query[d]));
    // vmulq + vaddq rather than vfmaq keeps rounding identical to scalar.
    acc = vaddq_f64(acc, vmulq_f64(diff, diff));
  }
  return acc;
}

inline double sq_dist1(const PointsSoA& pts, const double* query, std::size_t j) {
  double acc = 0.0;
  for (std::size_t d = 0; d < pts.axis.size(); ++d) {
    const double diff = pts.axis[d][j] - query[d];
    acc = acc + diff * diff;
  }
  return acc;
}

void sq_dist_to_point_neon(const PointsSoA& pts, const double* query, double* out) {
  std::size_t j = 0;
  for (; j + 2 <= pts.count; j += 2) vst1q_f64(out + j, sq_dist2(pts, query, j));
  for (; j < pts.count; ++j) out[j] = sq_dist1(pts, query, j);
}

void min_sq_dist_update_neon(const PointsSoA& pts, const double* query, double* mins) {
  std::size_t j = 0;
  for (; j + 2 <= pts.count; j += 2) {
    const float64x2_t dist = sq_dist2(pts, query, j);
    const float64x2_t cur = vld1q_f64(mins + j);
    vst1q_f64(mins + j, vbslq_f64(vcltq_f64(dist, cur), dist, cur));
  }
  for (; j < pts.count; ++j) {
    const double dist = sq_dist1(pts, query, j);
    if (dist < mins[j]) mins[j] = dist;
  }
}

std::size_t argmax_first_neon(const double* v, std::size_t n) {
  double best = v[0];
  std::size_t j = 0;
  if (n >= 2) {
    float64x2_t vmax = vld1q_f64(v);
    for (j = 2; j + 2 <= n; j += 2) vmax = vmaxq_f64(vmax, vld1q_f64(v + j));
    best = vmaxvq_f64(vmax);
  }
  for (; j < n; ++j) best = v[j] > best ? v[j] : best;
  for (std::size_t k = 0; k < n; ++k) {
    if (v[k] == best) return k;
  }
  return 0;
}

const KernelTable kNeonTable{Isa::neon, &sq_dist_to_point_neon, &min_sq_dist_update_neon,
                             &argmax_first_neon};

}  // namespace

namespace detail {
const KernelTable* neon_table() { return &kNeonTable; }
}  // namespace detail

}  // namespace smn::simd

#else

namespace smn::simd::detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace smn::simd::detail

#endif
