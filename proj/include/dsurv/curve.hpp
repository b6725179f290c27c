#pragma once

#include "dsurv/odds.hpp"
#include "dsurv/prob.hpp"

namespace dsurv {

enum class CurveModel { Prob, Odds };

struct SurvivalCurve {
  CurveModel model = CurveModel::Prob;
  std::vector<double> t;  // t_k
  Eigen::VectorXd hazard;
  Eigen::VectorXd survival;
  Eigen::VectorXd cumhaz;
  Eigen::VectorXd se_log_surv_robust;
  Eigen::VectorXd se_log_surv_model_based;
  Eigen::VectorXd se_surv_robust;
  Eigen::VectorXd se_surv_model_based;
  std::vector<std::string> flags;  // per k, empty when clean
  std::vector<std::string> warnings;

  int J() const { return static_cast<int>(hazard.size()); }
};

/** Per-k accumulators behind the standard errors. */
struct SurvCurveWork {
  Eigen::MatrixXd u;  // J x d: U_k (prob) or Gamma_k (odds), row k-1
  Eigen::MatrixXd influence;  // n x J: phi_k(i) or psi_k(i)
};

// variance: V-b or V-b2 for the model-based SEs
SurvivalCurve prob_curve(const RiskSets& rs, const prob::ProbFit& fit, const Eigen::VectorXd& x0,
                         const VarianceEstimate& variance, SurvCurveWork* work = nullptr);
SurvivalCurve odds_curve(const RiskSets& rs, const odds::OddsFit& fit, const Eigen::VectorXd& x0,
                         const VarianceEstimate& variance, SurvCurveWork* work = nullptr);

/** exp(-cumulative hazard) with its log-scale variance, for comparison only. */
struct CumHazCurve {
  Eigen::VectorXd estimate;
  Eigen::VectorXd variance;  // of log estimate
  // per-k cumulative E{R p(1-p)} / E^2(Re) and E{R p} / E^2(Re) terms (each already divided by n)
  Eigen::VectorXd term_pq;
  Eigen::VectorXd term_p;
};

// uses B^{-1} when use_binv, otherwise the supplied matrix
CumHazCurve prob_cumhaz_alt(const RiskSets& rs, const prob::ProbFit& fit, const Eigen::VectorXd& x0,
                            bool use_binv, const VarianceEstimate* variance = nullptr);

}  // namespace dsurv
