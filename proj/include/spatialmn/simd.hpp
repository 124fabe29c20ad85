#pragma once

// Data-parallel geometry kernels with scalar, AVX2 and NEON variants.
//
// Every variant performs the same IEEE operations in the same order
// (no FMA, no reassociation), so results are bit-identical to the scalar
// reference. Orderings and neighbour sets built on top of these kernels
// are therefore reproducible regardless of the instruction set in use.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace smn::simd {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

/// Coordinates stored structure-of-arrays: axis[d][j] is coordinate d of point j.
struct PointsSoA {
  std::span<const double* const> axis;
  std::size_t count = 0;
};

struct KernelTable {
  Isa isa;
  /// out[j] = sum_d (axis[d][j] - query[d])^2, accumulated in axis order.
  void (*sq_dist_to_point)(const PointsSoA& pts, const double* query, double* out);
  /// mins[j] = min(mins[j], squared distance from point j to query).
  void (*min_sq_dist_update)(const PointsSoA& pts, const double* query, double* mins);
  /// Index of the first maximum of v[0..n); n must be positive.
  std::size_t (*argmax_first)(const double* v, std::size_t n);
};

/// Instruction sets usable on this machine, scalar first.
std::vector<Isa> available_isas();

/// Kernel table for a specific ISA; throws ValidationError if unavailable.
const KernelTable& table_for(Isa isa);

/// Kernel table selected at first use: the widest available ISA.
const KernelTable& kernels();

/// Override runtime selection (tests and benchmarking).
void force_isa(Isa isa);
void reset_isa();

namespace detail {
extern const KernelTable kScalarTable;
const KernelTable* avx2_table();  // nullptr when not compiled for x86
const KernelTable* neon_table();  // nullptr when not compiled for aarch64
bool cpu_has_avx2();
}  // namespace detail

}  // namespace smn::simd
