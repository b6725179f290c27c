#pragma once

#include "dsurv/data.hpp"
#include "dsurv/types.hpp"

#include <optional>

namespace dsurv::odds {

/** Weighted Mantel-Haenszel fit of the hazard-odds model. */
struct OddsFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd beta0;  // J entries; -inf where T_j = 0, +inf where T_j = n_j
  Eigen::MatrixXd jacobian;  // H(beta-hat), not symmetric in general
  double score_norm = 0;
  int iterations = 0;
  int n = 0;
  std::string init;
  bool fd_fallback = false;
  std::vector<std::string> warnings;
};

// Single risk-set kernels, without the 1/n factor.
Eigen::VectorXd score_term(const Eigen::MatrixXd& x, const Eigen::VectorXd& d, const Eigen::VectorXd& beta);
// pairwise form sum_i D_i sum_l (1-D_l) e^{x_l b} (x_i - x_l) / S0
Eigen::VectorXd score_term_pairwise(const Eigen::MatrixXd& x, const Eigen::VectorXd& d,
                                    const Eigen::VectorXd& beta);
Eigen::MatrixXd jacobian_term(const Eigen::MatrixXd& x, const Eigen::VectorXd& d, const Eigen::VectorXd& beta);
Eigen::MatrixXd gb_term(const Eigen::MatrixXd& x, const Eigen::VectorXd& d, const Eigen::VectorXd& beta);
Eigen::MatrixXd sigma_hat_term(const Eigen::MatrixXd& x, const Eigen::VectorXd& d, const Eigen::VectorXd& beta);
Eigen::MatrixXd sigma_tilde_term(const Eigen::MatrixXd& x, const Eigen::VectorXd& d,
                                 const Eigen::VectorXd& beta);
Eigen::MatrixXd sigma_tilde_sym_term(const Eigen::MatrixXd& x, const Eigen::VectorXd& d,
                                     const Eigen::VectorXd& beta);

Eigen::VectorXd score(const RiskSets& rs, const Eigen::VectorXd& beta);
Eigen::VectorXd score_pairwise(const RiskSets& rs, const Eigen::VectorXd& beta);
Eigen::MatrixXd jacobian(const RiskSets& rs, const Eigen::VectorXd& beta);
// central differences of -score
Eigen::MatrixXd jacobian_fd(const RiskSets& rs, const Eigen::VectorXd& beta, double h = 1e-6);

OddsFit fit(const RiskSets& rs, const SolverOptions& opt = {},
            std::optional<Eigen::VectorXd> init = std::nullopt);
inline OddsFit fit(const DiscreteSurvivalData& data, const SolverOptions& opt = {}) {
  return fit(RiskSets(data), opt);
}
// fits from 0 and from the Breslow-Peto estimate
std::vector<OddsFit> multistart(const RiskSets& rs, const SolverOptions& opt = {});

Eigen::VectorXd baseline(const RiskSets& rs, const Eigen::VectorXd& beta);

// n x d, row i = sum_j (g_j1 + g_j2)(i)
Eigen::MatrixXd influence(const RiskSets& rs, const OddsFit& fit);

Eigen::MatrixXd meat_robust(const RiskSets& rs, const OddsFit& fit);
Eigen::MatrixXd meat_model_based(const RiskSets& rs, const OddsFit& fit);
Eigen::MatrixXd meat_model_based2(const RiskSets& rs, const OddsFit& fit);
Eigen::MatrixXd meat_model_based3(const RiskSets& rs, const OddsFit& fit);

VarianceEstimate var_robust(const RiskSets& rs, const OddsFit& fit);
VarianceEstimate var_model_based(const RiskSets& rs, const OddsFit& fit);
VarianceEstimate var_model_based2(const RiskSets& rs, const OddsFit& fit);
VarianceEstimate var_model_based3(const RiskSets& rs, const OddsFit& fit);

}  // namespace dsurv::odds
