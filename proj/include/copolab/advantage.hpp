#pragma once

// Group-relative advantages and confidence-aware reweighting.
//
// Every function is a pure free function over Eigen dense expressions and is
// templated on the scalar type of its argument.

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "copolab/core.hpp"
#include "copolab/error.hpp"

namespace copolab {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Vector4 = Eigen::Matrix<Scalar, 4, 1>;

/// Population standard deviation.
template <typename Derived>
typename Derived::Scalar population_std(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar mean = x.mean();
  return std::sqrt((x.array() - mean).square().mean());
}

/// Standardizes `x` within its group: (x - mean) / std. When std < guard the
/// whole group maps to exact zeros.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Derived::RowsAtCompileTime, 1>
standardize(const Eigen::MatrixBase<Derived>& x,
            typename Derived::Scalar guard) {
  using Scalar = typename Derived::Scalar;
  using Out = Eigen::Matrix<Scalar, Derived::RowsAtCompileTime, 1>;
  const Scalar sd = population_std(x);
  if (!(sd >= guard)) return Out::Zero(x.size());
  return ((x.array() - x.mean()) / std::max(sd, guard)).matrix();
}

/// Trajectory-level advantage of each member of a rollout group.
template <typename Derived>
VectorX<typename Derived::Scalar> group_advantages(
    const Eigen::MatrixBase<Derived>& rewards,
    typename Derived::Scalar guard) {
  if (rewards.size() < 2) {
    throw GroupTooSmall("a rollout group needs at least two trajectories");
  }
  return standardize(rewards.derived().col(0), guard);
}

/// Confidence scores of one cognitive group standardized within the group.
template <typename Derived>
Vector4<typename Derived::Scalar> normalize_confidences(
    const Eigen::MatrixBase<Derived>& confidences,
    typename Derived::Scalar guard) {
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 4);
  return standardize(confidences.derived(), guard);
}

/// Temperature-scaled softmax, softmax(m * c_norm).
template <typename Derived>
Vector4<typename Derived::Scalar> confidence_weights(
    const Eigen::MatrixBase<Derived>& normalized,
    typename Derived::Scalar temperature) {
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 4);
  using Scalar = typename Derived::Scalar;
  if (!(temperature > Scalar(0))) {
    throw ConfigError("softmax temperature must be positive");
  }
  const Vector4<Scalar> z = temperature * normalized;
  const Vector4<Scalar> e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// Per-level advantages of one step. A successful trajectory spreads its
/// advantage over the four levels; a failed one keeps a single unweighted
/// value for the original step.
template <typename Derived>
VectorX<typename Derived::Scalar> step_advantages(
    typename Derived::Scalar trajectory_advantage,
    const Eigen::MatrixBase<Derived>& weights, bool success) {
  using Scalar = typename Derived::Scalar;
  if (!success) {
    VectorX<Scalar> single(1);
    single(0) = trajectory_advantage;
    return single;
  }
  return weights * trajectory_advantage;
}

/// Confidence of an action from its per-token log-probabilities.
///
/// `distributions` holds one next-token distribution per action token (rows)
/// and is read only by kNegEntropy; it may be empty for the other metrics.
template <typename DerivedLp, typename DerivedP>
typename DerivedLp::Scalar confidence(
    ConfidenceMetric metric, const Eigen::MatrixBase<DerivedLp>& logprobs,
    const Eigen::MatrixBase<DerivedP>& distributions) {
  using Scalar = typename DerivedLp::Scalar;
  if (logprobs.size() == 0) throw EmptyAction("confidence over an empty action");
  switch (metric) {
    case ConfidenceMetric::kMeanLogProb:
      return logprobs.mean();
    case ConfidenceMetric::kMaxLogProb:
      return logprobs.maxCoeff();
    case ConfidenceMetric::kMinLogProb:
      return logprobs.minCoeff();
    case ConfidenceMetric::kNegEntropy: {
      if (distributions.rows() != logprobs.size()) {
        throw EmptyAction("entropy metric needs one distribution per token");
      }
      Scalar total = 0;
      for (Eigen::Index r = 0; r < distributions.rows(); ++r) {
        Scalar h = 0;
        for (Eigen::Index c = 0; c < distributions.cols(); ++c) {
          const Scalar p = distributions(r, c);
          if (p > Scalar(0)) h -= p * std::log(p);
        }
        total += h;
      }
      return -total / static_cast<Scalar>(distributions.rows());
    }
  }
  return std::numeric_limits<Scalar>::quiet_NaN();
}

/// Everything computed for one expanded step.
template <typename Scalar>
struct LevelWeighting {
  Vector4<Scalar> confidence;
  Vector4<Scalar> normalized;
  Vector4<Scalar> weights;
  Vector4<Scalar> advantages;
};

/// Confidence -> normalized score -> weight -> per-level advantage.
template <typename Derived>
LevelWeighting<typename Derived::Scalar> reweight_cognitive_group(
    const Eigen::MatrixBase<Derived>& confidences,
    typename Derived::Scalar trajectory_advantage,
    typename Derived::Scalar temperature, typename Derived::Scalar guard) {
  LevelWeighting<typename Derived::Scalar> out;
  out.confidence = confidences;
  out.normalized = normalize_confidences(out.confidence, guard);
  out.weights = confidence_weights(out.normalized, temperature);
  out.advantages = step_advantages(trajectory_advantage, out.weights, true);
  return out;
}

}  // namespace copolab
