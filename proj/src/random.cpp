#include "spatialmn/random.hpp"

#include <cmath>

namespace smn {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t st = seed;
  for (auto& word : s_) word = splitmix64(st);
}

Rng Rng::stream(std::uint64_t seed, StreamTag tag, std::uint64_t a, std::uint64_t b,
                std::uint64_t c) {
  std::uint64_t st = seed;
  std::uint64_t h = splitmix64(st);
  for (std::uint64_t key : {static_cast<std::uint64_t>(tag), a, b, c}) {
    st = h ^ (key * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    h = splitmix64(st);
  }
  return Rng(h);
}

Rng::result_type Rng::operator()() {
  const auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t x;
  do {
    x = (*this)();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw ValidationError("gamma shape must be positive");
  if (shape < 1.0) {
    // Boost: Gamma(a) = Gamma(a + 1) * U^{1/a}.
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double Rng::chi_square(double df) { return 2.0 * gamma(0.5 * df); }

double Rng::inverse_gamma(double shape, double scale) { return scale / gamma(shape); }

Vector Rng::normal_vector(Index n) {
  Vector z(n);
  for (Index i = 0; i < n; ++i) z(i) = normal();
  return z;
}

Matrix sample_inverse_wishart_chol(double df, const Matrix& scale_chol, Rng& rng) {
  const Index p = scale_chol.rows();
  if (df < static_cast<double>(p)) {
    throw ValidationError("inverse-Wishart degrees of freedom " + std::to_string(df) +
                          " below dimension " + std::to_string(p));
  }
  // Bartlett factor A of Wishart(df, I): lower triangular, chi diagonal.
  Matrix bartlett = Matrix::Zero(p, p);
  for (Index i = 0; i < p; ++i) {
    bartlett(i, i) = std::sqrt(rng.chi_square(df - static_cast<double>(i)));
    for (Index j = 0; j < i; ++j) bartlett(i, j) = rng.normal();
  }
  // W = C A A^T C^T with C = L^{-T} (C C^T = scale^{-1}), so
  // W^{-1} = (L A^{-T}) (L A^{-T})^T.
  const Matrix a_inv_t = bartlett.transpose().triangularView<Eigen::Upper>().solve(
      Matrix::Identity(p, p));
  const Matrix factor = scale_chol.triangularView<Eigen::Lower>() * a_inv_t;
  Matrix out = factor * factor.transpose();
  return 0.5 * (out + out.transpose());
}

Matrix sample_inverse_wishart(double df, const Matrix& scale, Rng& rng) {
  Eigen::LLT<Matrix> llt(scale);
  if (llt.info() != Eigen::Success) throw NumericalError("inverse-Wishart scale is not SPD");
  return sample_inverse_wishart_chol(df, llt.matrixL(), rng);
}

}  // namespace smn
