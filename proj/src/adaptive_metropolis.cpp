#include "spatialmn/adaptive_metropolis.hpp"

#include <algorithm>
#include <cmath>

namespace smn {

AdaptiveMetropolis::AdaptiveMetropolis(Vector start, double start_log_target,
                                       const Matrix& proposal_shape, Options options)
    : position_(std::move(start)),
      log_target_(start_log_target),
      shape_(proposal_shape),
      options_(options) {
  const Index d = position_.size();
  require(shape_.rows() == d && shape_.cols() == d, "proposal shape must be d x d");
  require(std::isfinite(start_log_target), "adaptive Metropolis: starting log target is not finite");
  require(options_.target_acceptance > 0.0 && options_.target_acceptance < 1.0,
          "target acceptance must lie in (0, 1)");
  Eigen::LLT<Matrix> llt(shape_);
  require(llt.info() == Eigen::Success, "proposal shape must be symmetric positive definite");
  chol_ = llt.matrixL();
}

AdaptiveMetropolis::StepResult AdaptiveMetropolis::step(const LogTarget& log_target, Rng& rng,
                                                        long iteration) {
  const Vector z = rng.normal_vector(position_.size());
  const double u = rng.uniform();
  return step_with(log_target, z, u, iteration);
}

AdaptiveMetropolis::StepResult AdaptiveMetropolis::step_with(const LogTarget& log_target,
                                                             const Vector& z, double uniform,
                                                             long iteration) {
  StepResult result;
  const Vector proposal = position_ + chol_ * z;
  const double lp = log_target(proposal);
  ++proposed_;
  if (!std::isfinite(lp)) {
    result.nonfinite = true;
    ++nonfinite_;
  } else {
    const double delta = lp - log_target_;
    result.acceptance_probability = delta >= 0.0 ? 1.0 : std::exp(delta);
    if (uniform < result.acceptance_probability) {
      result.accepted = true;
      position_ = proposal;
      log_target_ = lp;
      ++accepted_;
    }
  }

  const double znorm2 = z.squaredNorm();
  if (iteration <= options_.adapt_until && znorm2 > 0.0) {
    const double d = static_cast<double>(position_.size());
    const double eta =
        std::min(1.0, d * std::pow(static_cast<double>(std::max(iteration, 1L)), -options_.step_decay));
    const double scale = eta * (result.acceptance_probability - options_.target_acceptance) / znorm2;
    const Vector sz = chol_ * z;
    // S (I + c z z^T) S^T = S S^T + c (S z)(S z)^T.
    Matrix next = shape_ + scale * sz * sz.transpose();
    next = 0.5 * (next + next.transpose());
    Eigen::LLT<Matrix> llt(next);
    if (llt.info() == Eigen::Success) {
      shape_ = std::move(next);
      chol_ = llt.matrixL();
    }
  }
  return result;
}

}  // namespace smn
