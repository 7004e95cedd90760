#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace copolab {

/// Adam with bias correction.
class Adam {
 public:
  explicit Adam(Eigen::Index n, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : m_(Eigen::VectorXd::Zero(n)),
        v_(Eigen::VectorXd::Zero(n)),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps) {}

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr) {
    if (lr == 0.0) return;
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    theta.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  long steps() const { return t_; }

 private:
  Eigen::VectorXd m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

/// Rescales `grad` so its norm is at most `max_norm`; returns the norm
/// before clipping. Non-positive `max_norm` disables clipping.
inline double clip_grad_norm(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (max_norm > 0.0 && norm > max_norm) grad *= max_norm / norm;
  return norm;
}

}  // namespace copolab
