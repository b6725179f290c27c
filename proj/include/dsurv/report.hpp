#pragma once

#include "dsurv/curve.hpp"
#include "dsurv/odds.hpp"
#include "dsurv/plogit.hpp"
#include "dsurv/prob.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace dsurv {

// NaN marks a column that was not computed or is undefined.
struct CoefRow {
  std::string name;
  double estimate = 0;
  double se_naive = 0;
  double se_model_based = 0;
  double se_model_based2 = 0;
  double se_model_based3 = 0;
  double se_robust = 0;
  double z = 0;  // estimate / se_robust
  double p = 0;
};

struct BaselineRow {
  int j = 0;
  double t = 0;
  int at_risk = 0;
  int events = 0;
  double value = 0;  // log hazard, log odds or intercept at x = 0; NaN when not estimable
};

struct Convergence {
  bool converged = true;
  int iterations = 0;
  double score_norm = 0;
  std::string init;
  bool fd_fallback = false;
};

struct FitReport {
  std::string model;  // prob | odds | plogit
  int n = 0;
  int J = 0;
  std::vector<CoefRow> coefficients;
  std::string baseline_scale;
  std::vector<BaselineRow> baseline;
  Convergence convergence;
  std::vector<std::string> warnings;
};

// which model-based columns to fill; robust is always computed
struct VarianceRequest {
  bool naive = false;
  bool mb = false;
  bool mb2 = true;
  bool mb3 = false;
};

FitReport make_report(const RiskSets& rs, const std::vector<std::string>& names, const prob::ProbFit& fit,
                      const VarianceRequest& req);
FitReport make_report(const RiskSets& rs, const std::vector<std::string>& names, const odds::OddsFit& fit,
                      const VarianceRequest& req);
// plogit has one model-based variance; it fills se_model_based when mb or mb2 is requested
FitReport make_report(const RiskSets& rs, const std::vector<std::string>& names, const plogit::PlogitFit& fit,
                      const VarianceRequest& req);

std::string to_json(const FitReport& r);
FitReport report_from_json(const std::string& text);

// fixed 3-decimal layout for reading
std::string to_table(const FitReport& r);
std::string coefficients_csv(const FitReport& r);

void write_curve_csv(std::ostream& out, const SurvivalCurve& c);

}  // namespace dsurv
