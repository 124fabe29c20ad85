#pragma once

#include <functional>

#include "spatialmn/common.hpp"
#include "spatialmn/random.hpp"

namespace smn {

/// Random-walk Metropolis whose proposal covariance follows the robust
/// adaptive Metropolis recursion
///   M <- S (I + eta_t (alpha_t - target) z z^T / |z|^2) S^T,   S = chol(M),
/// with eta_t = min(1, d t^{-2/3}). Adaptation stops after `adapt_until`
/// iterations.
class AdaptiveMetropolis {
 public:
  using LogTarget = std::function<double(const Vector&)>;

  struct Options {
    double target_acceptance = 0.234;
    double step_decay = 2.0 / 3.0;
    long adapt_until = 0;
  };

  struct StepResult {
    bool accepted = false;
    bool nonfinite = false;
    double acceptance_probability = 0.0;
  };

  AdaptiveMetropolis(Vector start, double start_log_target, const Matrix& proposal_shape,
                     Options options);

  /// One Metropolis step using draws from `rng`. `iteration` is 1-based and
  /// decides whether and how strongly to adapt.
  StepResult step(const LogTarget& log_target, Rng& rng, long iteration);

  /// Same step with a caller-supplied standard-normal increment.
  StepResult step_with(const LogTarget& log_target, const Vector& z, double uniform, long iteration);

  const Vector& position() const { return position_; }
  double log_target_value() const { return log_target_; }
  const Matrix& proposal_shape() const { return shape_; }
  long accepted() const { return accepted_; }
  long proposed() const { return proposed_; }
  long nonfinite_rejections() const { return nonfinite_; }
  double acceptance_rate() const {
    return proposed_ == 0 ? 0.0 : static_cast<double>(accepted_) / static_cast<double>(proposed_);
  }

  /// Replace the cached target value, e.g. after a Gibbs update changed the
  /// conditional the target depends on.
  void refresh(double log_target) { log_target_ = log_target; }

 private:
  Vector position_;
  double log_target_;
  Matrix shape_;
  Matrix chol_;
  Options options_;
  long accepted_ = 0;
  long proposed_ = 0;
  long nonfinite_ = 0;
};

}  // namespace smn
