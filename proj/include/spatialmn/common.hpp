#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace smn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Bad input: malformed files, out-of-range parameters, violated preconditions.
/// The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown during computation (Cholesky failure, non-finite values).
/// The CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest dimension for which dense n x n matrices are materialized
/// without an explicit opt-in.
inline constexpr Index kDeskScaleLimit = 5000;

enum class DenseGate { desk_scale, unbounded };

inline void check_desk_scale(Index n, DenseGate gate, const char* what) {
  if (gate == DenseGate::desk_scale && n > kDeskScaleLimit) {
    throw ValidationError(std::string(what) + ": dense " + std::to_string(n) + "x" +
                          std::to_string(n) + " matrix exceeds desk-scale limit of " +
                          std::to_string(kDeskScaleLimit) + "; pass DenseGate::unbounded to force");
  }
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace smn
