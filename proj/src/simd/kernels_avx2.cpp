#include "spatialmn/simd.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

// Compiled for AVX2 via function attributes only; the rest of the library
// stays baseline x86-64 and reaches these through the dispatch table.

namespace smn::simd {
namespace {

__attribute__((target("avx2"))) inline __m256d sq_dist4(const PointsSoA& pts,
                                                        const double* query, std::size_t j) {
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t d = 0; d < pts.axis.size(); ++d) {
    const __m256d diff =
        _mm256_sub_pd(_mm256_loadu_pd(pts.axis[d] + j), _mm256_set1_pd(query[d]));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
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

__attribute__((target("avx2"))) void sq_dist_to_point_avx2(const PointsSoA& pts,
                                                           const double* query, double* out) {
  std::size_t j = 0;
  for (; j + 4 <= pts.count; j += 4) {
    _mm256_storeu_pd(out + j, sq_dist4(pts, query, j));
  }
  for (; j < pts.count; ++j) out[j] = sq_dist1(pts, query, j);
}

__attribute__((target("avx2"))) void min_sq_dist_update_avx2(const PointsSoA& pts,
                                                             const double* query, double* mins) {
  std::size_t j = 0;
  for (; j + 4 <= pts.count; j += 4) {
    const __m256d dist = sq_dist4(pts, query, j);
    const __m256d cur = _mm256_loadu_pd(mins + j);
    // Keep the current value unless the new distance is strictly smaller.
    const __m256d less = _mm256_cmp_pd(dist, cur, _CMP_LT_OQ);
    _mm256_storeu_pd(mins + j, _mm256_blendv_pd(cur, dist, less));
  }
  for (; j < pts.count; ++j) {
    const double dist = sq_dist1(pts, query, j);
    if (dist < mins[j]) mins[j] = dist;
  }
}

__attribute__((target("avx2"))) std::size_t argmax_first_avx2(const double* v, std::size_t n) {
  std::size_t j = 0;
  double best = v[0];
  if (n >= 4) {
    __m256d vmax = _mm256_loadu_pd(v);
    for (j = 4; j + 4 <= n; j += 4) vmax = _mm256_max_pd(vmax, _mm256_loadu_pd(v + j));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, vmax);
    for (double lane : lanes) best = lane > best ? lane : best;
  }
  for (; j < n; ++j) best = v[j] > best ? v[j] : best;
  // First index attaining the maximum.
  const __m256d target = _mm256_set1_pd(best);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const int mask = _mm256_movemask_pd(_mm256_cmp_pd(_mm256_loadu_pd(v + k), target, _CMP_EQ_OQ));
    if (mask != 0) return k + static_cast<std::size_t>(__builtin_ctz(static_cast<unsigned>(mask)));
  }
  for (; k < n; ++k) {
    if (v[k] == best) return k;
  }
  return 0;
}

const KernelTable kAvx2Table{Isa::avx2, &sq_dist_to_point_avx2, &min_sq_dist_update_avx2,
                             &argmax_first_avx2};

}  // namespace

namespace detail {
const KernelTable* avx2_table() { return &kAvx2Table; }
bool cpu_has_avx2() { return __builtin_cpu_supports("avx2"); }
}  // namespace detail

}  // namespace smn::simd

#else

namespace smn::simd::detail {
const KernelTable* avx2_table() { return nullptr; }
bool cpu_has_avx2() { return false; }
}  // namespace smn::simd::detail

#endif
