#pragma once

#include "dsurv/data.hpp"
#include "dsurv/types.hpp"

namespace dsurv::prob {

/** Breslow-Peto fit of the hazard-probability model. */
struct ProbFit {
  Eigen::VectorXd gamma;
  Eigen::VectorXd gamma0;  // J entries, -inf where T_j = 0
  Eigen::MatrixXd hessian;  // B(gamma-hat)
  double score_norm = 0;
  int iterations = 0;
  int n = 0;
  std::vector<std::string> warnings;
};

// Single risk-set kernels, without the 1/n factor.
Eigen::VectorXd score_term(const Eigen::MatrixXd& x, const Eigen::VectorXd& d, const Eigen::VectorXd& gamma);
// same quantity as sum_i (D_i - T e^{x_i g} / S0) x_i
Eigen::VectorXd score_term_exchange(const Eigen::MatrixXd& x, const Eigen::VectorXd& d,
                                    const Eigen::VectorXd& gamma);
Eigen::MatrixXd hessian_term(const Eigen::MatrixXd& x, const Eigen::VectorXd& d, const Eigen::VectorXd& gamma);
Eigen::MatrixXd ab_term(const Eigen::MatrixXd& x, const Eigen::VectorXd& d, const Eigen::VectorXd& gamma);
Eigen::MatrixXd v_term(const Eigen::MatrixXd& x, const Eigen::VectorXd& d, const Eigen::VectorXd& gamma);

Eigen::VectorXd score(const RiskSets& rs, const Eigen::VectorXd& gamma);
Eigen::VectorXd score_exchange(const RiskSets& rs, const Eigen::VectorXd& gamma);
Eigen::MatrixXd hessian(const RiskSets& rs, const Eigen::VectorXd& gamma);
double objective(const RiskSets& rs, const Eigen::VectorXd& gamma);

ProbFit fit(const RiskSets& rs, const SolverOptions& opt = {});
inline ProbFit fit(const DiscreteSurvivalData& data, const SolverOptions& opt = {}) {
  return fit(RiskSets(data), opt);
}

// baseline log-hazards for given coefficients
Eigen::VectorXd baseline(const RiskSets& rs, const Eigen::VectorXd& gamma);

// n x d, row i = sum_j h_j(i)
Eigen::MatrixXd influence(const RiskSets& rs, const ProbFit& fit);

Eigen::MatrixXd meat_robust(const RiskSets& rs, const ProbFit& fit);
Eigen::MatrixXd meat_model_based(const RiskSets& rs, const ProbFit& fit);
Eigen::MatrixXd meat_model_based2(const RiskSets& rs, const ProbFit& fit);

VarianceEstimate var_naive(const RiskSets& rs, const ProbFit& fit);  // B^{-1}
VarianceEstimate var_robust(const RiskSets& rs, const ProbFit& fit);
VarianceEstimate var_model_based(const RiskSets& rs, const ProbFit& fit);
VarianceEstimate var_model_based2(const RiskSets& rs, const ProbFit& fit);

}  // namespace dsurv::prob
