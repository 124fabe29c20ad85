#pragma once

#include <vector>

#include "spatialmn/common.hpp"
#include "spatialmn/simd.hpp"

namespace smn {

/// n points in 2 or 3 dimensions. Coordinates are held column-major
/// (n x p), which doubles as the structure-of-arrays layout the SIMD
/// kernels consume.
class LocationSet {
 public:
  LocationSet() = default;
  explicit LocationSet(Matrix coords);

  Index size() const { return coords_.rows(); }
  Index dim() const { return coords_.cols(); }
  const Matrix& coords() const { return coords_; }
  Eigen::RowVectorXd point(Index i) const { return coords_.row(i); }

  /// Points reordered so that row r of the result is row order[r] of this set.
  LocationSet permuted(const std::vector<Index>& order) const;

  /// SoA view over rows [0, count) for the SIMD kernels.
  struct SoaView {
    std::vector<const double*> axes;
    simd::PointsSoA view() const { return {axes, count}; }
    std::size_t count = 0;
  };
  SoaView soa(Index count) const;

 private:
  Matrix coords_;
};

/// Permutation of the locations plus, for each rank, the conditioning set
/// of nearest earlier-ranked locations. Ranks and neighbour entries are
/// 0-based; order[r] is the original index of the location with rank r.
struct MaximinOrdering {
  std::vector<Index> order;
  std::vector<std::vector<Index>> neighbors;
  Index max_neighbors = 0;
};

double euclidean_distance(const LocationSet& locs, Index i, Index j);

Matrix pairwise_distances(const LocationSet& locs, DenseGate gate = DenseGate::desk_scale);

/// Greedy maximin order. The first point is the one nearest the centroid;
/// each later point maximizes its minimum distance to the points already
/// placed. All ties go to the lowest original index.
std::vector<Index> maximin_order(const LocationSet& locs);

/// For locations already in maximin order, the min(m, r) nearest earlier
/// ranks of each rank r, sorted by increasing distance (ties: lower rank).
std::vector<std::vector<Index>> predecessor_neighbors(const LocationSet& ordered, Index m);

MaximinOrdering build_ordering(const LocationSet& locs, Index m);

}  // namespace smn
