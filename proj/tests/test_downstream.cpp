#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "spatialmn/downstream.hpp"
#include "test_support.hpp"

using namespace smn;

namespace {

// True when the two labelings agree up to a relabeling.
bool same_partition(const std::vector<Index>& a, const std::vector<Index>& b) {
  if (a.size() != b.size()) return false;
  std::map<Index, Index> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (ab.emplace(a[i], b[i]).first->second != b[i]) return false;
    if (ba.emplace(b[i], a[i]).first->second != a[i]) return false;
  }
  return true;
}

Matrix planted_similarity(const std::vector<Index>& sizes, Rng& rng) {
  Index n = 0;
  for (Index s : sizes) n += s;
  Matrix w(n, n);
  std::vector<Index> label;
  for (std::size_t b = 0; b < sizes.size(); ++b) label.insert(label.end(), sizes[b], static_cast<Index>(b));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= i; ++j) {
      const double v = label[i] == label[j] ? 0.6 + 0.3 * rng.uniform() : 0.05 * rng.uniform();
      w(i, j) = w(j, i) = v;
    }
  return w;
}

}  // namespace

TEST_SUITE("downstream") {
  TEST_CASE("partial correlations worked example") {
    Matrix omega(2, 2);
    omega << 2, -1, -1, 2;
    const Matrix p = partial_correlations(omega);
    CHECK(p(0, 1) == doctest::Approx(0.5));
    CHECK(p(1, 0) == doctest::Approx(0.5));
    CHECK(p(0, 0) == 1.0);
  }

  TEST_CASE("partial correlations are bounded and symmetric") {
    Rng rng(1);
    for (int rep = 0; rep < 20; ++rep) {
      const Matrix p = partial_correlations(test::random_spd(6, rng));
      CHECK(test::max_abs(p - p.transpose()) < 1e-15);
      CHECK(p.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
    }
  }

  TEST_CASE("threshold network") {
    Matrix p = Matrix::Identity(3, 3);
    p(0, 1) = p(1, 0) = 0.1;
    p(1, 2) = p(2, 1) = -0.3;
    const auto loose = threshold_network(p, 0.05);
    REQUIRE(loose.edges.size() == 2);
    CHECK(loose.edges[0].i == 0);
    CHECK(loose.edges[0].j == 1);
    CHECK(loose.edges[1].weight == -0.3);
    CHECK(loose.gene_names == std::vector<std::string>{"g1", "g2", "g3"});
    const auto tight = threshold_network(p, 0.15, {"a", "b", "c"});
    REQUIRE(tight.edges.size() == 1);
    CHECK(tight.edges[0].i == 1);
    CHECK(threshold_network(p, 1.1).edges.empty());
    CHECK(threshold_network(p, 0.1).edges.size() == 2);
    CHECK_THROWS_AS(threshold_network(p, -0.2), ValidationError);
    CHECK_THROWS_AS(threshold_network(p, 0.1, {"a"}), ValidationError);
  }

  TEST_CASE("correlation against distance") {
    Matrix c(3, 2);
    c << 0, 0, 3, 4, 0, 1;
    Matrix corr = Matrix::Identity(3, 3);
    corr(0, 1) = corr(1, 0) = 0.2;
    corr(0, 2) = corr(2, 0) = 0.7;
    corr(1, 2) = corr(2, 1) = 0.1;
    const auto rows = correlation_vs_distance(corr, LocationSet(c));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].distance == doctest::Approx(5.0));
    CHECK(rows[0].correlation == 0.2);
    CHECK(rows[1].j == 2);
    CHECK(rows[1].distance == doctest::Approx(1.0));
    CHECK(rows[2].i == 1);
  }

  TEST_CASE("Laplacian of a triangle") {
    const Matrix w = Matrix::Ones(3, 3);
    const Matrix l = normalized_laplacian(w);
    const auto emb = spectral_embedding(l, 3);
    CHECK(emb.eigenvalues(0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(emb.eigenvalues(0)) < 1e-12);
    CHECK(emb.eigenvalues(1) == doctest::Approx(1.5));
    CHECK(emb.eigenvalues(2) == doctest::Approx(1.5));
  }

  TEST_CASE("disconnected components give repeated zero eigenvalues") {
    Matrix w = Matrix::Zero(4, 4);
    w(0, 1) = w(1, 0) = 1.0;
    w(2, 3) = w(3, 2) = 1.0;
    const auto emb = spectral_embedding(normalized_laplacian(w), 4);
    CHECK(std::abs(emb.eigenvalues(0)) < 1e-12);
    CHECK(std::abs(emb.eigenvalues(1)) < 1e-12);
    CHECK(emb.eigenvalues(2) == doctest::Approx(2.0));
  }

  TEST_CASE("negative weights and isolated nodes") {
    Matrix w(3, 3);
    w << 1, -0.5, 0, -0.5, 1, 0, 0, 0, 1;
    const Matrix clamp = normalized_laplacian(w, NegativeWeights::clamp);
    CHECK(test::max_abs(clamp - Matrix::Identity(3, 3)) == 0.0);
    const Matrix abs = normalized_laplacian(w, NegativeWeights::absolute);
    CHECK(abs(0, 1) == doctest::Approx(-1.0));
    CHECK(abs(2, 2) == 1.0);
  }

  TEST_CASE("spectral invariants on random similarities") {
    Rng rng(2);
    for (int rep = 0; rep < 20; ++rep) {
      const Index n = 5 + rep;
      Matrix w(n, n);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j <= i; ++j) w(i, j) = w(j, i) = rng.uniform() * 2.0 - 0.5;
      const Matrix l = normalized_laplacian(w);
      CHECK(test::max_abs(l - l.transpose()) < 1e-14);
      const auto emb = spectral_embedding(l, 3);
      for (Index k = 0; k < 3; ++k) {
        CHECK(emb.eigenvalues(k) >= -1e-10);
        CHECK(emb.eigenvalues(k) <= 2.0 + 1e-10);
        if (k > 0) CHECK(emb.eigenvalues(k) >= emb.eigenvalues(k - 1));
      }
      CHECK(test::max_abs(emb.vectors.transpose() * emb.vectors - Matrix::Identity(3, 3)) < 1e-10);
      CHECK(test::max_abs(l * emb.vectors - emb.vectors * emb.eigenvalues.asDiagonal()) < 1e-9);
      for (Index k = 0; k < 3; ++k) {
        Index first = 0;
        while (std::abs(emb.vectors(first, k)) <= 1e-12) ++first;
        CHECK(emb.vectors(first, k) > 0.0);
      }
    }
  }

  TEST_CASE("k-means edge cases") {
    Rng rng(3);
    const Matrix pts = test::random_points(12, 2, rng);
    const auto all = kmeans(pts, 12, 1, 3);
    CHECK(all.wcss == doctest::Approx(0.0));
    const auto one = kmeans(pts, 1, 1, 3);
    const double total = (pts.rowwise() - pts.colwise().mean()).squaredNorm();
    CHECK(one.wcss == doctest::Approx(total).epsilon(1e-12));
    CHECK(within_cluster_ss(pts, one.labels) == doctest::Approx(total).epsilon(1e-12));
    CHECK(one.restart_wcss.size() == 3);
    CHECK_THROWS_AS(kmeans(pts, 13, 1), ValidationError);
    CHECK_THROWS_AS(kmeans(pts, 0, 1), ValidationError);
  }

  TEST_CASE("k-means recovers separated blobs deterministically") {
    Rng rng(4);
    Matrix pts(60, 2);
    std::vector<Index> truth;
    for (Index i = 0; i < 60; ++i) {
      const Index b = i % 3;
      truth.push_back(b);
      pts(i, 0) = 10.0 * b + 0.3 * rng.normal();
      pts(i, 1) = 5.0 * (b == 1) + 0.3 * rng.normal();
    }
    const auto a = kmeans(pts, 3, 9);
    CHECK(same_partition(a.labels, truth));
    const auto b = kmeans(pts, 3, 9, 10, 300, 4);
    CHECK(a.labels == b.labels);
    CHECK(a.wcss == b.wcss);
    CHECK(a.restart_wcss == b.restart_wcss);
  }

  TEST_CASE("spectral clustering recovers planted blocks") {
    Rng rng(5);
    const Matrix w = planted_similarity({10, 15, 12}, rng);
    const auto res = spectral_cluster(w, 3, 3, 11);
    std::vector<Index> truth;
    for (Index b = 0; b < 3; ++b) truth.insert(truth.end(), b == 0 ? 10 : b == 1 ? 15 : 12, b);
    CHECK(same_partition(res.labels, truth));
    CHECK(res.embedding.rows() == 37);
  }

  TEST_CASE("elbow diagnostics") {
    Rng rng(6);
    const Matrix w = planted_similarity({8, 8, 8}, rng);
    const auto e = elbow_diagnostics(w, 6, 3, 5, 3);
    CHECK(e.eigenvalues.size() == 6);
    REQUIRE(e.wcss.size() == 5);
    for (std::size_t k = 1; k < e.wcss.size(); ++k) CHECK(e.wcss[k] <= e.wcss[k - 1] + 1e-12);
    CHECK(e.eigenvalues(3) - e.eigenvalues(2) > e.eigenvalues(2) - e.eigenvalues(1));
  }
}
