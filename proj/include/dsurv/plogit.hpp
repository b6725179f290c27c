#pragma once

#include "dsurv/data.hpp"
#include "dsurv/types.hpp"

namespace dsurv::plogit {

/** Pooled logistic regression with one intercept per interval. */
struct PlogitFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd beta0;  // J entries; NaN for excluded intervals
  std::vector<int> included;  // intervals (1-based) kept in the likelihood
  double loglik = 0;
  double score_norm = 0;
  int iterations = 0;
  int n = 0;
  std::vector<std::string> warnings;

  // observed information in block form
  Eigen::VectorXd info_intercepts;  // diagonal block, one per included interval
  Eigen::MatrixXd info_cross;  // d x m
  Eigen::MatrixXd info_beta;  // d x d

  // (m + d) x (m + d) with intercepts first
  Eigen::MatrixXd fisher() const;
};

PlogitFit fit(const RiskSets& rs, const SolverOptions& opt = {});
inline PlogitFit fit(const DiscreteSurvivalData& data, const SolverOptions& opt = {}) {
  return fit(RiskSets(data), opt);
}

double loglik(const RiskSets& rs, const std::vector<int>& included, const Eigen::VectorXd& beta0,
              const Eigen::VectorXd& beta);

struct PlogitVariances {
  VarianceEstimate model_based;
  VarianceEstimate robust;
};

PlogitVariances variances(const RiskSets& rs, const PlogitFit& fit);

}  // namespace dsurv::plogit
