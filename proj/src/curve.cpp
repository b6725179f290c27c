#include "dsurv/curve.hpp"

#include "dsurv/linalg.hpp"
#include "kernel.hpp"

#include <cmath>
#include <limits>

namespace dsurv {

using detail::ExpWeights;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SurvivalCurve blank(CurveModel model, const RiskSets& rs) {
  SurvivalCurve c;
  c.model = model;
  c.t = rs.times;
  const int J = rs.J;
  c.hazard = VectorXd::Zero(J);
  c.survival = VectorXd::Zero(J);
  c.cumhaz = VectorXd::Zero(J);
  c.se_log_surv_robust = VectorXd::Constant(J, kNaN);
  c.se_log_surv_model_based = VectorXd::Constant(J, kNaN);
  c.flags.assign(J, "");
  int small = 0;
  for (int j = 0; j < J; ++j) small += rs.summary.n[j] > 0 && rs.summary.n[j] < 10;
  if (small > 0) c.warnings.push_back(std::to_string(small) + " risk set(s) with fewer than 10 subjects");
  return c;
}

void finish(SurvivalCurve& c) {
  double s = 1, h = 0;
  for (int k = 0; k < c.J(); ++k) {
    s *= 1 - c.hazard(k);
    h += c.hazard(k);
    c.survival(k) = s;
    c.cumhaz(k) = h;
  }
  c.se_surv_robust = c.survival.cwiseProduct(c.se_log_surv_robust);
  c.se_surv_model_based = c.survival.cwiseProduct(c.se_log_surv_model_based);
}

}  // namespace

SurvivalCurve prob_curve(const RiskSets& rs0, const prob::ProbFit& fit, const VectorXd& x0,
                         const VarianceEstimate& variance, SurvCurveWork* work) {
  RiskSets rs = rs0.shifted(x0);
  SurvivalCurve c = blank(CurveModel::Prob, rs);
  const int n = rs.n;
  MatrixXd binv = inverse_spd(fit.hessian, "B");
  MatrixXd m = prob::influence(rs, fit) * binv;  // row i = (B^{-1} h_i)^T

  VectorXd phi = VectorXd::Zero(n);
  VectorXd u = VectorXd::Zero(rs.d);
  double term = 0;
  bool broken = false;
  if (work) {
    work->u = MatrixXd::Zero(rs.J, rs.d);
    work->influence = MatrixXd::Zero(n, rs.J);
  }
  auto set = rs.sets.begin();
  int bad = 0;
  for (int k = 1; k <= rs.J; ++k) {
    if (set != rs.sets.end() && set->j == k) {
      const auto& s = *set++;
      ExpWeights e(s.x, fit.gamma);
      const double T = s.d.sum();
      const double inv_s0 = std::exp(-e.log_s0());
      const double p0 = T * inv_s0;
      VectorXd xbar = e.s1 / e.s0;
      VectorXd p = (T / e.s0) * e.w;
      c.hazard(k - 1) = p0;
      if (1 - p0 <= 0) broken = true;
      if (!broken) {
        const double f = -1 / (1 - p0);
        phi -= f * p0 * (m * xbar);
        for (int i = 0; i < s.size(); ++i) phi(s.members[i]) += f * n * (s.d(i) - p(i)) * inv_s0;
        term += (p.array() * (1 - p.array())).sum() * inv_s0 * inv_s0 / ((1 - p0) * (1 - p0));
        u += p0 * xbar / (1 - p0);
      }
    }
    if (broken) {
      c.flags[k - 1] = "hazard>=1";
      ++bad;
      continue;
    }
    if (work) {
      work->u.row(k - 1) = u.transpose();
      work->influence.col(k - 1) = phi;
    }
    c.se_log_surv_robust(k - 1) = std::sqrt(phi.squaredNorm()) / n;
    c.se_log_surv_model_based(k - 1) = std::sqrt(term + u.dot(variance.matrix * u) / n);
  }
  finish(c);
  for (int k = 0; k < c.J(); ++k)
    if (c.survival(k) < 0) c.flags[k] += c.flags[k].empty() ? "negative" : ";negative";
  if (bad > 0) c.warnings.push_back("fitted baseline hazard >= 1: log-survival SE undefined for " + std::to_string(bad) +
                                    " interval(s)");
  int neg = 0;
  for (int k = 0; k < c.J(); ++k) neg += c.survival(k) < 0;
  if (neg > 0) c.warnings.push_back(std::to_string(neg) + " negative survival estimate(s)");
  return c;
}

SurvivalCurve odds_curve(const RiskSets& rs0, const odds::OddsFit& fit, const VectorXd& x0,
                         const VarianceEstimate& variance, SurvCurveWork* work) {
  RiskSets rs = rs0.shifted(x0);
  SurvivalCurve c = blank(CurveModel::Odds, rs);
  const int n = rs.n;
  MatrixXd hinv = inverse_general(fit.jacobian, "Jacobian H");
  MatrixXd m = odds::influence(rs, fit) * hinv.transpose();  // row i = (H^{-1} g_i)^T

  VectorXd psi = VectorXd::Zero(n);
  VectorXd gam = VectorXd::Zero(rs.d);
  double term = 0;
  bool broken = false;
  if (work) {
    work->u = MatrixXd::Zero(rs.J, rs.d);
    work->influence = MatrixXd::Zero(n, rs.J);
  }
  auto set = rs.sets.begin();
  int bad = 0;
  for (int k = 1; k <= rs.J; ++k) {
    if (set != rs.sets.end() && set->j == k) {
      const auto& s = *set++;
      ExpWeights e(s.x, fit.beta);
      const double T = s.d.sum();
      VectorXd cw = (1.0 - s.d.array()) * e.w.array();
      const double u0 = cw.sum();
      if (u0 == 0) {
        c.hazard(k - 1) = 1;
        broken = true;
      } else {
        const double q = 1 / (1 + std::exp(std::log(u0) + e.shift - std::log(T)));
        c.hazard(k - 1) = q;
        VectorXd cbar = s.x.transpose() * cw / u0;
        if (!broken) {
          psi += q * (m * cbar);
          for (int i = 0; i < s.size(); ++i)
            psi(s.members[i]) -= q * n * (s.d(i) / T - (1 - s.d(i)) * e.w(i) / u0);
          term += (e.s0 / u0) * q * q / T;
          gam += q * cbar;
        }
      }
    }
    if (broken) {
      c.flags[k - 1] = "hazard=1";
      ++bad;
      continue;
    }
    if (work) {
      work->u.row(k - 1) = gam.transpose();
      work->influence.col(k - 1) = psi;
    }
    c.se_log_surv_robust(k - 1) = std::sqrt(psi.squaredNorm()) / n;
    c.se_log_surv_model_based(k - 1) = std::sqrt(term + gam.dot(variance.matrix * gam) / n);
  }
  finish(c);
  if (bad > 0) c.warnings.push_back("interval with all subjects failing: log-survival SE undefined for " +
                                    std::to_string(bad) + " interval(s)");
  return c;
}

CumHazCurve prob_cumhaz_alt(const RiskSets& rs0, const prob::ProbFit& fit, const VectorXd& x0, bool use_binv,
                            const VarianceEstimate* variance) {
  RiskSets rs = rs0.shifted(x0);
  MatrixXd v;
  if (use_binv)
    v = inverse_spd(fit.hessian, "B");
  else if (variance)
    v = variance->matrix;
  else
    throw InputError("a variance matrix is required when B^{-1} is not used");
  CumHazCurve out;
  out.estimate = VectorXd::Zero(rs.J);
  out.variance = VectorXd::Zero(rs.J);
  out.term_pq = VectorXd::Zero(rs.J);
  out.term_p = VectorXd::Zero(rs.J);
  VectorXd u = VectorXd::Zero(rs.d);
  double h = 0, tp = 0, tpq = 0;
  auto set = rs.sets.begin();
  for (int k = 1; k <= rs.J; ++k) {
    if (set != rs.sets.end() && set->j == k) {
      const auto& s = *set++;
      ExpWeights e(s.x, fit.gamma);
      const double T = s.d.sum();
      const double inv_s0 = std::exp(-e.log_s0());
      const double p0 = T * inv_s0;
      VectorXd p = (T / e.s0) * e.w;
      h += p0;
      tp += T * inv_s0 * inv_s0;
      tpq += (p.array() * (1 - p.array())).sum() * inv_s0 * inv_s0;
      u += p0 * e.s1 / e.s0;
    }
    out.estimate(k - 1) = std::exp(-h);
    out.variance(k - 1) = tp + u.dot(v * u) / rs.n;
    out.term_p(k - 1) = tp;
    out.term_pq(k - 1) = tpq;
  }
  return out;
}

}  // namespace dsurv
