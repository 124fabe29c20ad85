#include "spatialmn/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace smn {

LocationSet::LocationSet(Matrix coords) : coords_(std::move(coords)) {
  require(coords_.rows() >= 1, "location set must contain at least one point");
  require(coords_.cols() == 2 || coords_.cols() == 3,
          "locations must be 2- or 3-dimensional, got " + std::to_string(coords_.cols()));
  require(coords_.allFinite(), "location coordinates must be finite");
}

LocationSet LocationSet::permuted(const std::vector<Index>& order) const {
  require(static_cast<Index>(order.size()) == size(), "permutation length mismatch");
  Matrix out(size(), dim());
  for (Index r = 0; r < size(); ++r) out.row(r) = coords_.row(order[r]);
  return LocationSet(std::move(out));
}

LocationSet::SoaView LocationSet::soa(Index count) const {
  SoaView v;
  v.count = static_cast<std::size_t>(count);
  for (Index d = 0; d < dim(); ++d) v.axes.push_back(coords_.col(d).data());
  return v;
}

double euclidean_distance(const LocationSet& locs, Index i, Index j) {
  return (locs.coords().row(i) - locs.coords().row(j)).norm();
}

Matrix pairwise_distances(const LocationSet& locs, DenseGate gate) {
  const Index n = locs.size();
  check_desk_scale(n, gate, "pairwise_distances");
  const auto& k = simd::kernels();
  const auto soa = locs.soa(n);
  Matrix dist(n, n);
  std::vector<double> query(locs.dim());
  for (Index j = 0; j < n; ++j) {
    for (Index d = 0; d < locs.dim(); ++d) query[d] = locs.coords()(j, d);
    k.sq_dist_to_point(soa.view(), query.data(), dist.col(j).data());
  }
  dist = dist.cwiseSqrt();
  // The kernel computes (x_i - x_j)^2 which is symmetric bit-for-bit, but
  // pin the diagonal and symmetry explicitly.
  for (Index j = 0; j < n; ++j) {
    dist(j, j) = 0.0;
    for (Index i = j + 1; i < n; ++i) dist(j, i) = dist(i, j);
  }
  return dist;
}

std::vector<Index> maximin_order(const LocationSet& locs) {
  const Index n = locs.size();
  const Index p = locs.dim();
  const auto& k = simd::kernels();
  const auto soa = locs.soa(n);

  std::vector<double> query(p);
  for (Index d = 0; d < p; ++d) query[d] = locs.coords().col(d).mean();

  // Nearest to centroid; min_element returns the first minimum.
  std::vector<double> work(n);
  k.sq_dist_to_point(soa.view(), query.data(), work.data());
  Index next = std::min_element(work.begin(), work.end()) - work.begin();

  std::vector<Index> order;
  order.reserve(n);
  std::fill(work.begin(), work.end(), std::numeric_limits<double>::infinity());
  for (Index step = 0; step < n; ++step) {
    order.push_back(next);
    for (Index d = 0; d < p; ++d) query[d] = locs.coords()(next, d);
    k.min_sq_dist_update(soa.view(), query.data(), work.data());
    // Squared distances are >= 0, so -1 removes placed points from the argmax.
    work[next] = -1.0;
    if (step + 1 < n) next = static_cast<Index>(k.argmax_first(work.data(), work.size()));
  }
  return order;
}

std::vector<std::vector<Index>> predecessor_neighbors(const LocationSet& ordered, Index m) {
  require(m >= 1, "neighbour count m must be positive, got " + std::to_string(m));
  const Index n = ordered.size();
  const Index p = ordered.dim();
  const auto& k = simd::kernels();
  const auto soa = ordered.soa(n);

  std::vector<std::vector<Index>> sets(n);
  std::vector<double> dist(n);
  std::vector<Index> ranks(n);
  std::vector<double> query(p);
  for (Index i = 1; i < n; ++i) {
    for (Index d = 0; d < p; ++d) query[d] = ordered.coords()(i, d);
    simd::PointsSoA prefix = soa.view();
    prefix.count = static_cast<std::size_t>(i);
    k.sq_dist_to_point(prefix, query.data(), dist.data());
    const Index take = std::min(m, i);
    std::iota(ranks.begin(), ranks.begin() + i, Index{0});
    const auto closer = [&](Index a, Index b) {
      return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
    };
    std::partial_sort(ranks.begin(), ranks.begin() + take, ranks.begin() + i, closer);
    sets[i].assign(ranks.begin(), ranks.begin() + take);
  }
  return sets;
}

MaximinOrdering build_ordering(const LocationSet& locs, Index m) {
  MaximinOrdering out;
  out.order = maximin_order(locs);
  out.neighbors = predecessor_neighbors(locs.permuted(out.order), m);
  out.max_neighbors = m;
  return out;
}

}  // namespace smn
