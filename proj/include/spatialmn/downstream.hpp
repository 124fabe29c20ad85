#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spatialmn/common.hpp"
#include "spatialmn/spatial.hpp"

namespace smn {

/// rho_ij = -Omega_ij / sqrt(Omega_ii Omega_jj) off the diagonal, 1 on it.
Matrix partial_correlations(const Matrix& precision);

struct NetworkEdge {
  Index i = 0;
  Index j = 0;
  double weight = 0.0;
};

struct GeneNetwork {
  std::vector<std::string> gene_names;
  Matrix pcorr;
  std::vector<NetworkEdge> edges;  ///< i < j, row-major order
  double cutoff = 0.0;
};

/// Keeps every pair with |rho_ij| >= cutoff. Empty `names` yields "g1".."gN".
GeneNetwork threshold_network(const Matrix& pcorr, double cutoff,
                              std::vector<std::string> names = {});

struct DistanceCorrelation {
  Index i = 0;
  Index j = 0;
  double distance = 0.0;
  double correlation = 0.0;
};

/// All pairs i < j in row-major order.
std::vector<DistanceCorrelation> correlation_vs_distance(const Matrix& col_corr,
                                                         const LocationSet& locs);

enum class NegativeWeights { clamp, absolute };

/// I - D^{-1/2} W D^{-1/2} after zeroing the diagonal of W and clamping (or
/// taking absolute values of) negative weights. Isolated nodes get an
/// identity row.
Matrix normalized_laplacian(const Matrix& similarity,
                            NegativeWeights negatives = NegativeWeights::clamp);

struct SpectralEmbedding {
  Vector eigenvalues;  ///< k smallest, ascending
  Matrix vectors;      ///< n x k, orthonormal columns
};

/// Eigenvectors of the k smallest eigenvalues of a symmetric Laplacian. Each
/// vector's first entry with magnitude above 1e-12 is made positive.
SpectralEmbedding spectral_embedding(const Matrix& laplacian, Index k);

struct KMeansResult {
  std::vector<Index> labels;  ///< 0-based cluster ids
  Matrix centers;             ///< K x dim
  double wcss = 0.0;
  std::vector<double> restart_wcss;
};

/// Lloyd's algorithm from k-means++ seeds; the restart with the lowest WCSS
/// wins (first one on ties). Restart r draws from its own substream.
KMeansResult kmeans(const Matrix& points, Index clusters, std::uint64_t seed, int restarts = 10,
                    int max_iterations = 300, int threads = 1);

/// Sum of squared distances from each point to its cluster mean.
double within_cluster_ss(const Matrix& points, const std::vector<Index>& labels);

struct ClusterResult {
  std::vector<Index> labels;
  double wcss = 0.0;
  Vector eigenvalues;
  Matrix embedding;
};

/// Laplacian of the similarity, k-dimensional embedding, then k-means.
ClusterResult spectral_cluster(const Matrix& similarity, Index k, Index clusters, std::uint64_t seed,
                               int restarts = 10, NegativeWeights negatives = NegativeWeights::clamp);

struct ElbowDiagnostics {
  Vector eigenvalues;        ///< first k_max, ascending
  std::vector<double> wcss;  ///< K = 1..K_max on the k-dimensional embedding
};

ElbowDiagnostics elbow_diagnostics(const Matrix& similarity, Index k_max, Index k,
                                   Index clusters_max, std::uint64_t seed, int restarts = 10,
                                   NegativeWeights negatives = NegativeWeights::clamp);

}  // namespace smn
