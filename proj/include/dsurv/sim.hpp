#pragma once

#include "dsurv/curve.hpp"
#include "dsurv/data.hpp"
#include "dsurv/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace dsurv::sim {

// Exponential / Weibull: continuous times discretized on the grid.
// DiscreteProb / DiscreteOdds: interval-by-interval draws from the discrete models themselves.
enum class EventLaw { Exponential, Weibull, DiscreteProb, DiscreteOdds };
// Uniform: U(0, 4 e^{-x b}); BetaTest: 4 e^{-x b} Beta(2,2) in the test arm, uniform otherwise
enum class CensorLaw { Uniform, BetaTest };
// how Tr enters the linear predictor: test 1 / standard 2, or test 0 / standard 1
enum class TreatmentCoding { OneTwo, ZeroOne };

struct SimScenario {
  std::string name = "scenario";
  int n = 100;
  Eigen::VectorXd beta_star = (Eigen::VectorXd(5) << -.4, .6, -.4, .3, .1).finished();
  EventLaw event_law = EventLaw::Exponential;
  double shape_test = 1;  // Weibull shape, Tr = 1
  double shape_standard = 1;  // Weibull shape, Tr = 2
  CensorLaw censor_law = CensorLaw::Uniform;
  TreatmentCoding treatment_coding = TreatmentCoding::OneTwo;
  double bin_width = .01;
  double t_max = 0;  // > 0 fixes the grid to (0, t_max]; otherwise it covers the largest observed time
  std::vector<double> baseline_hazard;  // discrete laws: hazard at x = 0 per interval
  CensorOption censor_option = CensorOption::CensoredLate;
  int reps = 2000;
  std::uint64_t seed = 1;

  void validate() const;
  static std::vector<std::string> covariate_names() { return {"Tr", "X1", "X2", "X3", "X4"}; }
};

std::string to_json(const SimScenario& s);
SimScenario scenario_from_json(const std::string& text);

// Independent stream for replicate `rep`.
std::mt19937_64 replicate_engine(std::uint64_t seed, std::uint64_t rep);

// Tr in {1, 2} then four correlated normals.
Eigen::RowVectorXd draw_covariates(std::mt19937_64& rng);

DiscreteSurvivalData generate(const SimScenario& s, std::uint64_t rep);

struct SeColumn {
  std::string label;  // e.g. "naive", "mb2", "robust"
  Eigen::VectorXd mean_se;  // sqrt of the Monte Carlo mean variance
};

struct MethodSummary {
  std::string method;
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;  // NaN with fewer than two successes
  std::vector<SeColumn> se;
  int successes = 0;
  int failures = 0;

  const SeColumn& column(const std::string& label) const;
};

struct SimSummary {
  std::string scenario;
  int reps = 0;
  std::vector<std::string> coefficients;
  std::vector<MethodSummary> methods;

  const MethodSummary& method(const std::string& name) const;
};

enum class Method { BP, WMH, Plogit };

SimSummary replicate(const SimScenario& s, const std::vector<Method>& methods = {Method::BP, Method::WMH, Method::Plogit},
                     int threads = 1);

// rows: method, coefficient, mean, sd, one column per SE label, successes, failures
std::string summary_csv(const SimSummary& summary);

/** Survival-curve calibration at one interval k. */
struct CurveCalibration {
  int k = 0;
  double log_surv_mean = 0;
  double log_surv_sd = 0;
  double se_robust = 0;  // sqrt of the mean robust variance
  double se_model_based = 0;
  int successes = 0;
  int failures = 0;
};

CurveCalibration curve_calibration(const SimScenario& s, CurveModel model, const Eigen::VectorXd& x0, int k,
                                   int threads = 1);

/** Exact moments of one risk set's terms over all event configurations. */
struct ProbMoments {
  Eigen::VectorXd mean_score;  // E zeta
  Eigen::MatrixXd var_score;  // var zeta
  Eigen::MatrixXd mean_v;  // E v-hat
};

struct OddsMoments {
  Eigen::VectorXd mean_score;  // E tau
  Eigen::MatrixXd var_score;
  Eigen::MatrixXd mean_sigma_hat;
  Eigen::MatrixXd mean_sigma_tilde;
  Eigen::MatrixXd mean_sigma_tilde_sym;
};

constexpr int kMaxEnumeration = 20;

// hazards p0 e^{x g}; every p must lie in [0, 1]
ProbMoments enumerate_prob(const Eigen::MatrixXd& x, double p0, const Eigen::VectorXd& gamma,
                           std::optional<int> given_t = std::nullopt);
// logit p = alpha + x b
OddsMoments enumerate_odds(const Eigen::MatrixXd& x, double alpha, const Eigen::VectorXd& beta,
                           std::optional<int> given_t = std::nullopt);

}  // namespace dsurv::sim
