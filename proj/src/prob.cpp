#include "dsurv/prob.hpp"

#include "dsurv/linalg.hpp"
#include "kernel.hpp"

#include <cmath>
#include <limits>

namespace dsurv::prob {

using detail::ExpWeights;
using detail::small_step;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// sum_i (Q1 - T x_i) e^{x_i g} / S0; no cancellation when one weight dominates
VectorXd score_term(const MatrixXd& x, const VectorXd& d, const VectorXd& gamma) {
  ExpWeights e(x, gamma);
  VectorXd q1 = x.transpose() * d;
  return -(((d.sum() * x).rowwise() - q1.transpose()).transpose() * e.w) / e.s0;
}

VectorXd score_term_exchange(const MatrixXd& x, const VectorXd& d, const VectorXd& gamma) {
  ExpWeights e(x, gamma);
  VectorXd r = d - (d.sum() / e.s0) * e.w;
  return x.transpose() * r;
}

MatrixXd hessian_term(const MatrixXd& x, const VectorXd& d, const VectorXd& gamma) {
  ExpWeights e(x, gamma);
  MatrixXd xc = x.rowwise() - (e.s1 / e.s0).transpose();
  return (d.sum() / e.s0) * (xc.transpose() * e.w.asDiagonal() * xc);
}

MatrixXd ab_term(const MatrixXd& x, const VectorXd& d, const VectorXd& gamma) {
  ExpWeights e(x, gamma);
  MatrixXd xc = x.rowwise() - (e.s1 / e.s0).transpose();
  VectorXd p = (d.sum() / e.s0) * e.w;
  VectorXd q = p.array() * (1.0 - p.array());
  return xc.transpose() * q.asDiagonal() * xc;
}

MatrixXd v_term(const MatrixXd& x, const VectorXd& d, const VectorXd& gamma) {
  ExpWeights e(x, gamma);
  const double T = d.sum();
  VectorXd xbar = e.s1 / e.s0;
  VectorXd q1 = x.transpose() * d;
  MatrixXd xc = x.rowwise() - xbar.transpose();
  MatrixXd b = (T * x).rowwise() - q1.transpose();
  VectorXd c = (1.0 - d.array()) * e.w.array() / e.s0;
  return xc.transpose() * c.asDiagonal() * b;
}

namespace {

struct Eval {
  double obj = 0;
  VectorXd score;
  MatrixXd hess;
};

Eval evaluate(const RiskSets& rs, const VectorXd& gamma, bool need_hess) {
  Eval ev;
  ev.score = VectorXd::Zero(rs.d);
  if (need_hess) ev.hess = MatrixXd::Zero(rs.d, rs.d);
  for (const auto& s : rs.sets) {
    ExpWeights e(s.x, gamma);
    const double T = s.d.sum();
    VectorXd xbar = e.s1 / e.s0;
    VectorXd q1 = s.x.transpose() * s.d;
    ev.obj += q1.dot(gamma) - T * e.log_s0();
    ev.score -= ((T * s.x).rowwise() - q1.transpose()).transpose() * e.w / e.s0;
    if (need_hess) {
      MatrixXd xc = s.x.rowwise() - xbar.transpose();
      ev.hess += (T / e.s0) * (xc.transpose() * e.w.asDiagonal() * xc);
    }
  }
  ev.obj /= rs.n;
  ev.score /= rs.n;
  if (need_hess) ev.hess /= rs.n;
  return ev;
}

}  // namespace

VectorXd score(const RiskSets& rs, const VectorXd& gamma) { return evaluate(rs, gamma, false).score; }

VectorXd score_exchange(const RiskSets& rs, const VectorXd& gamma) {
  VectorXd s = VectorXd::Zero(rs.d);
  for (const auto& r : rs.sets) s += score_term_exchange(r.x, r.d, gamma);
  return s / rs.n;
}

MatrixXd hessian(const RiskSets& rs, const VectorXd& gamma) { return evaluate(rs, gamma, true).hess; }

double objective(const RiskSets& rs, const VectorXd& gamma) { return evaluate(rs, gamma, false).obj; }

VectorXd baseline(const RiskSets& rs, const VectorXd& gamma) {
  VectorXd g0 = VectorXd::Constant(rs.J, -std::numeric_limits<double>::infinity());
  for (const auto& s : rs.sets) {
    ExpWeights e(s.x, gamma);
    g0(s.j - 1) = std::log(s.d.sum()) - e.log_s0();
  }
  return g0;
}

ProbFit fit(const RiskSets& rs, const SolverOptions& opt) {
  if (rs.d < 1) throw InputError("at least one covariate is required");
  if (rs.sets.empty()) throw InputError("no events in the data");
  ProbFit f;
  f.n = rs.n;
  VectorXd gamma = VectorXd::Zero(rs.d);
  Eval ev = evaluate(rs, gamma, true);
  int it = 0;
  bool converged = false;
  for (; it < opt.max_iter; ++it) {
    VectorXd step = inverse_spd(ev.hess, "rank-deficient design: B") * ev.score;
    // under monotone likelihood the score vanishes but the Newton step stays O(1)
    if (ev.score.cwiseAbs().maxCoeff() <= opt.tol && small_step(step, gamma)) {
      converged = true;
      break;
    }
    if (gamma.cwiseAbs().maxCoeff() > opt.divergence_bound)
      throw ConvergenceError("monotone likelihood: coefficients diverge");
    double t = 1;
    Eval next = evaluate(rs, gamma + step, true);
    const double slack = 1e-12 * (1 + std::abs(ev.obj));  // objective is flat to rounding near the root
    while (!(next.obj >= ev.obj - slack) && t > 1e-10) {
      t *= 0.5;
      next = evaluate(rs, gamma + t * step, true);
    }
    gamma += t * step;
    ev = std::move(next);
  }
  if (!converged) {
    if (ev.score.cwiseAbs().maxCoeff() <= opt.tol)
      throw ConvergenceError("monotone likelihood: score vanishes while coefficients keep growing");
    throw ConvergenceError("Breslow-Peto solver did not converge in " + std::to_string(opt.max_iter) + " iterations");
  }
  // one polishing step; quadratic convergence makes it essentially free
  {
    VectorXd step = inverse_spd(ev.hess, "rank-deficient design: B") * ev.score;
    Eval next = evaluate(rs, gamma + step, true);
    if (next.score.cwiseAbs().maxCoeff() < ev.score.cwiseAbs().maxCoeff()) {
      gamma += step;
      ev = std::move(next);
    }
  }
  inverse_spd(ev.hess, "rank-deficient design: B");
  f.gamma = gamma;
  f.hessian = symmetrize(ev.hess);
  f.score_norm = ev.score.cwiseAbs().maxCoeff();
  f.iterations = it;
  f.gamma0 = baseline(rs, gamma);

  int over = 0;
  for (const auto& s : rs.sets) {
    VectorXd eta = s.x * gamma;
    double g0 = f.gamma0(s.j - 1);
    for (int k = 0; k < s.size(); ++k)
      if (g0 + eta(k) > 0) ++over;
  }
  if (over > 0) f.warnings.push_back(std::to_string(over) + " fitted hazard probabilities exceed 1");
  return f;
}

MatrixXd influence(const RiskSets& rs, const ProbFit& fit) {
  MatrixXd h = MatrixXd::Zero(rs.n, rs.d);
  for (const auto& s : rs.sets) {
    ExpWeights e(s.x, fit.gamma);
    VectorXd xbar = e.s1 / e.s0;
    VectorXd r = s.d - (s.d.sum() / e.s0) * e.w;
    for (int k = 0; k < s.size(); ++k) h.row(s.members[k]) += r(k) * (s.x.row(k) - xbar.transpose());
  }
  return h;
}

MatrixXd meat_robust(const RiskSets& rs, const ProbFit& fit) {
  MatrixXd h = influence(rs, fit);
  return h.transpose() * h / rs.n;
}

MatrixXd meat_model_based(const RiskSets& rs, const ProbFit& fit) {
  MatrixXd a = MatrixXd::Zero(rs.d, rs.d);
  for (const auto& s : rs.sets) a += ab_term(s.x, s.d, fit.gamma);
  return a / rs.n;
}

MatrixXd meat_model_based2(const RiskSets& rs, const ProbFit& fit) {
  MatrixXd a = MatrixXd::Zero(rs.d, rs.d);
  for (const auto& s : rs.sets) a += v_term(s.x, s.d, fit.gamma);
  return symmetrize(a) / rs.n;
}

namespace {

VarianceEstimate make(VarianceKind kind, const MatrixXd& binv, const MatrixXd& meat, int n) {
  return {kind, sandwich(binv, meat), n};
}

}  // namespace

VarianceEstimate var_naive(const RiskSets& rs, const ProbFit& fit) {
  return {VarianceKind::Naive, symmetrize(inverse_spd(fit.hessian, "B")), rs.n};
}

VarianceEstimate var_robust(const RiskSets& rs, const ProbFit& fit) {
  return make(VarianceKind::Robust, inverse_spd(fit.hessian, "B"), meat_robust(rs, fit), rs.n);
}

VarianceEstimate var_model_based(const RiskSets& rs, const ProbFit& fit) {
  return make(VarianceKind::ModelBased, inverse_spd(fit.hessian, "B"), meat_model_based(rs, fit), rs.n);
}

VarianceEstimate var_model_based2(const RiskSets& rs, const ProbFit& fit) {
  return make(VarianceKind::ModelBased2, inverse_spd(fit.hessian, "B"), meat_model_based2(rs, fit), rs.n);
}

}  // namespace dsurv::prob
