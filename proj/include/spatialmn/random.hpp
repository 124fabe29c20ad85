#pragma once

// Portable random number generation.
//
// The standard library's distributions are implementation-defined, so
// draws would differ between libstdc++ and libc++. Everything here is
// specified bit-for-bit: xoshiro256** for bits, the polar method for
// normals and Marsaglia-Tsang for gammas.

#include <array>
#include <cstdint>
#include <limits>

#include "spatialmn/common.hpp"

namespace smn {

/// Stream tags used when deriving keyed substreams.
enum class StreamTag : std::uint64_t {
  theta_proposal = 1,
  column_update = 2,
  lambda_update = 3,
  simulation = 4,
  kmeans = 5,
  generic = 6,
};

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  /// Independent substream keyed by (seed, tag, a, b, c). Identical keys give
  /// identical streams; the result does not depend on call order or threads.
  static Rng stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0,
                    std::uint64_t c = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  /// Gamma with the given shape and unit scale.
  double gamma(double shape);
  double chi_square(double df);
  /// Inverse-gamma with density proportional to x^{-shape-1} exp(-scale/x).
  double inverse_gamma(double shape, double scale);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  Vector normal_vector(Index n);

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Draw from InverseWishart(df, scale) with density proportional to
/// |X|^{-(df+p+1)/2} exp(-tr(scale X^{-1})/2), via the Bartlett decomposition
/// of the Wishart(df, scale^{-1}). Requires df >= p; df need not be integer.
Matrix sample_inverse_wishart(double df, const Matrix& scale, Rng& rng);

/// Same draw given the lower Cholesky factor of the scale matrix.
Matrix sample_inverse_wishart_chol(double df, const Matrix& scale_chol, Rng& rng);

}  // namespace smn
