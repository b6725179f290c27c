#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace dsurv {

enum class VarianceKind { Naive, Robust, ModelBased, ModelBased2, ModelBased3 };

std::string to_string(VarianceKind k);

/**
 * Asymptotic covariance of sqrt(n)(estimate - target). The covariance of the
 * estimate itself is matrix / n.
 */
struct VarianceEstimate {
  VarianceKind kind = VarianceKind::Robust;
  Eigen::MatrixXd matrix;
  int n = 0;

  Eigen::MatrixXd covariance() const { return matrix / n; }
  Eigen::VectorXd se() const { return (matrix.diagonal() / n).cwiseSqrt(); }
};

struct SolverOptions {
  double tol = 1e-9;
  int max_iter = 50;
  double divergence_bound = 50;
};

}  // namespace dsurv
