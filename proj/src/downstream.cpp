#include "spatialmn/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spatialmn/parallel.hpp"
#include "spatialmn/random.hpp"

namespace smn {

Matrix partial_correlations(const Matrix& precision) {
  require(precision.rows() == precision.cols(), "precision must be square");
  const Index n = precision.rows();
  Vector inv_sd(n);
  for (Index i = 0; i < n; ++i) {
    if (!(precision(i, i) > 0.0)) {
      throw ValidationError("precision has a nonpositive diagonal entry at " + std::to_string(i));
    }
    inv_sd(i) = 1.0 / std::sqrt(precision(i, i));
  }
  Matrix rho(n, n);
  for (Index i = 0; i < n; ++i) {
    rho(i, i) = 1.0;
    for (Index j = 0; j < i; ++j) {
      const double omega = 0.5 * (precision(i, j) + precision(j, i));
      const double v = std::clamp(-omega * inv_sd(i) * inv_sd(j), -1.0, 1.0);
      rho(i, j) = v;
      rho(j, i) = v;
    }
  }
  return rho;
}

GeneNetwork threshold_network(const Matrix& pcorr, double cutoff, std::vector<std::string> names) {
  require(pcorr.rows() == pcorr.cols(), "partial correlation matrix must be square");
  require(cutoff >= 0.0, "cutoff must be nonnegative");
  const Index n = pcorr.rows();
  if (names.empty()) {
    for (Index i = 0; i < n; ++i) names.push_back("g" + std::to_string(i + 1));
  }
  require(static_cast<Index>(names.size()) == n, "one gene name per row is required");
  GeneNetwork net;
  net.gene_names = std::move(names);
  net.pcorr = pcorr;
  net.cutoff = cutoff;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (std::abs(pcorr(i, j)) >= cutoff) net.edges.push_back({i, j, pcorr(i, j)});
  return net;
}

std::vector<DistanceCorrelation> correlation_vs_distance(const Matrix& col_corr,
                                                         const LocationSet& locs) {
  require(col_corr.rows() == locs.size() && col_corr.cols() == locs.size(),
          "correlation matrix does not match the number of locations");
  std::vector<DistanceCorrelation> out;
  const Index n = locs.size();
  out.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      out.push_back({i, j, euclidean_distance(locs, i, j), col_corr(i, j)});
  return out;
}

Matrix normalized_laplacian(const Matrix& similarity, NegativeWeights negatives) {
  require(similarity.rows() == similarity.cols(), "similarity must be square");
  require(similarity.allFinite(), "similarity contains non-finite values");
  const Index n = similarity.rows();
  Matrix w = 0.5 * (similarity + similarity.transpose());
  for (Index i = 0; i < n; ++i) {
    w(i, i) = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (w(i, j) < 0.0) w(i, j) = negatives == NegativeWeights::clamp ? 0.0 : -w(i, j);
    }
  }
  const Vector degree = w.rowwise().sum();
  Vector inv_sqrt(n);
  for (Index i = 0; i < n; ++i) inv_sqrt(i) = degree(i) > 0.0 ? 1.0 / std::sqrt(degree(i)) : 0.0;
  Matrix lap = -(inv_sqrt.asDiagonal() * w * inv_sqrt.asDiagonal());
  for (Index i = 0; i < n; ++i) lap(i, i) = 1.0;
  return 0.5 * (lap + lap.transpose());
}

SpectralEmbedding spectral_embedding(const Matrix& laplacian, Index k) {
  require(laplacian.rows() == laplacian.cols(), "Laplacian must be square");
  require(k >= 1 && k <= laplacian.rows(), "k must lie in [1, n]");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(laplacian);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  SpectralEmbedding out;
  out.eigenvalues = eig.eigenvalues().head(k);
  out.vectors = eig.eigenvectors().leftCols(k);
  for (Index c = 0; c < k; ++c) {
    for (Index r = 0; r < out.vectors.rows(); ++r) {
      const double v = out.vectors(r, c);
      if (std::abs(v) > 1e-12) {
        if (v < 0.0) out.vectors.col(c) *= -1.0;
        break;
      }
    }
  }
  return out;
}

double within_cluster_ss(const Matrix& points, const std::vector<Index>& labels) {
  require(static_cast<Index>(labels.size()) == points.rows(), "one label per point is required");
  Index clusters = 0;
  for (Index l : labels) {
    require(l >= 0, "labels must be nonnegative");
    clusters = std::max(clusters, l + 1);
  }
  Matrix sums = Matrix::Zero(clusters, points.cols());
  Vector counts = Vector::Zero(clusters);
  for (Index i = 0; i < points.rows(); ++i) {
    sums.row(labels[i]) += points.row(i);
    counts(labels[i]) += 1.0;
  }
  double total = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    const Index l = labels[i];
    total += (points.row(i) - sums.row(l) / counts(l)).squaredNorm();
  }
  return total;
}

namespace {

struct LloydRun {
  std::vector<Index> labels;
  Matrix centers;
  double wcss = 0.0;
};

Index nearest_center(const Matrix& centers, const Eigen::RowVectorXd& x, double& best_d2) {
  Index best = 0;
  best_d2 = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < centers.rows(); ++c) {
    const double d2 = (centers.row(c) - x).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  return best;
}

Matrix kmeanspp_seeds(const Matrix& points, Index clusters, Rng& rng) {
  const Index n = points.rows();
  Matrix centers(clusters, points.cols());
  centers.row(0) = points.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
  Vector d2(n);
  for (Index i = 0; i < n; ++i) d2(i) = (points.row(i) - centers.row(0)).squaredNorm();
  for (Index c = 1; c < clusters; ++c) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= target && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = points.row(pick);
    for (Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (points.row(i) - centers.row(c)).squaredNorm());
  }
  return centers;
}

LloydRun lloyd(const Matrix& points, Matrix centers, int max_iterations) {
  const Index n = points.rows();
  const Index clusters = centers.rows();
  LloydRun run;
  run.labels.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      double d2 = 0.0;
      const Index c = nearest_center(centers, points.row(i), d2);
      if (c != run.labels[i]) {
        run.labels[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(clusters, points.cols());
    Vector counts = Vector::Zero(clusters);
    for (Index i = 0; i < n; ++i) {
      sums.row(run.labels[i]) += points.row(i);
      counts(run.labels[i]) += 1.0;
    }
    for (Index c = 0; c < clusters; ++c)
      if (counts(c) > 0.0) centers.row(c) = sums.row(c) / counts(c);
  }
  run.centers = centers;
  run.wcss = 0.0;
  for (Index i = 0; i < n; ++i) run.wcss += (points.row(i) - centers.row(run.labels[i])).squaredNorm();
  return run;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, Index clusters, std::uint64_t seed, int restarts,
                    int max_iterations, int threads) {
  require(clusters >= 1, "number of clusters must be positive");
  require(clusters <= points.rows(), "more clusters than points");
  require(restarts >= 1 && max_iterations >= 1, "restarts and iterations must be positive");
  require(points.allFinite(), "k-means input contains non-finite values");
  std::vector<LloydRun> runs(static_cast<std::size_t>(restarts));
  parallel_for(runs.size(), threads, [&](std::size_t r) {
    Rng rng = Rng::stream(seed, StreamTag::kmeans, static_cast<std::uint64_t>(r));
    runs[r] = lloyd(points, kmeanspp_seeds(points, clusters, rng), max_iterations);
  });
  std::size_t best = 0;
  KMeansResult out;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    out.restart_wcss.push_back(runs[r].wcss);
    if (runs[r].wcss < runs[best].wcss) best = r;
  }
  out.labels = std::move(runs[best].labels);
  out.centers = std::move(runs[best].centers);
  out.wcss = runs[best].wcss;
  return out;
}

ClusterResult spectral_cluster(const Matrix& similarity, Index k, Index clusters, std::uint64_t seed,
                               int restarts, NegativeWeights negatives) {
  const SpectralEmbedding emb = spectral_embedding(normalized_laplacian(similarity, negatives), k);
  const KMeansResult km = kmeans(emb.vectors, clusters, seed, restarts);
  return {km.labels, km.wcss, emb.eigenvalues, emb.vectors};
}

ElbowDiagnostics elbow_diagnostics(const Matrix& similarity, Index k_max, Index k,
                                   Index clusters_max, std::uint64_t seed, int restarts,
                                   NegativeWeights negatives) {
  require(k_max >= 1 && k >= 1 && clusters_max >= 1, "elbow limits must be positive");
  const Matrix lap = normalized_laplacian(similarity, negatives);
  ElbowDiagnostics out;
  out.eigenvalues = spectral_embedding(lap, std::min(k_max, lap.rows())).eigenvalues;
  const SpectralEmbedding emb = spectral_embedding(lap, k);
  for (Index c = 1; c <= std::min(clusters_max, lap.rows()); ++c)
    out.wcss.push_back(kmeans(emb.vectors, c, seed, restarts).wcss);
  return out;
}

}  // namespace smn
