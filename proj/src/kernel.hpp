#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace dsurv::detail {

/** exp(x b - m) with m = max x b, plus its first two aggregates. */
struct ExpWeights {
  Eigen::VectorXd w;
  double shift = 0;
  double s0 = 0;
  Eigen::VectorXd s1;

  ExpWeights(const Eigen::MatrixXd& x, const Eigen::VectorXd& b) {
    Eigen::VectorXd eta = x * b;
    shift = eta.maxCoeff();
    w = (eta.array() - shift).exp();
    s0 = w.sum();
    s1 = x.transpose() * w;
  }
  double log_s0() const { return std::log(s0) + shift; }
};

inline bool small_step(const Eigen::VectorXd& step, const Eigen::VectorXd& at) {
  if (step.size() == 0) return true;
  return step.cwiseAbs().maxCoeff() <= 1e-6 * (1 + at.cwiseAbs().maxCoeff());
}

}  // namespace dsurv::detail
