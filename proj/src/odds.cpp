#include "dsurv/odds.hpp"

#include "dsurv/linalg.hpp"
#include "dsurv/prob.hpp"
#include "kernel.hpp"

#include <cmath>
#include <limits>

namespace dsurv::odds {

using detail::ExpWeights;
using detail::small_step;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Risk-set aggregates in coordinates centred at the e^{x b}-weighted mean.
struct Agg {
  VectorXd w;
  double shift = 0;
  double s0 = 0;
  MatrixXd xc;
  VectorXd nd;  // 1 - D
  double T = 0;
  double u0 = 0;
  VectorXd u1;
  VectorXd q1;

  Agg(const MatrixXd& x, const VectorXd& d, const VectorXd& beta) {
    ExpWeights e(x, beta);
    w = e.w;
    shift = e.shift;
    s0 = e.s0;
    xc = x.rowwise() - (e.s1 / e.s0).transpose();
    nd = 1.0 - d.array();
    T = d.sum();
    VectorXd c = nd.cwiseProduct(w);
    u0 = c.sum();
    u1 = xc.transpose() * c;
    q1 = xc.transpose() * d;
  }
  // rows a_i = u0 x_i - u1 and b_i = T x_i - q1
  MatrixXd a() const { return (u0 * xc).rowwise() - u1.transpose(); }
  MatrixXd b() const { return (T * xc).rowwise() - q1.transpose(); }
};

}  // namespace

// sum_l (1 - D_l) e^{x_l b} (Q1 - T x_l) / S0 on raw covariates; stays accurate when the weights are lopsided
VectorXd score_term(const MatrixXd& x, const VectorXd& d, const VectorXd& beta) {
  ExpWeights e(x, beta);
  const double T = d.sum();
  VectorXd q1 = x.transpose() * d;
  VectorXd c = (1.0 - d.array()) * e.w.array() / e.s0;
  return -(((T * x).rowwise() - q1.transpose()).transpose() * c);
}

VectorXd score_term_pairwise(const MatrixXd& x, const VectorXd& d, const VectorXd& beta) {
  ExpWeights e(x, beta);
  VectorXd s = VectorXd::Zero(x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    if (d(i) == 0) continue;
    for (int l = 0; l < x.rows(); ++l)
      if (d(l) == 0) s += e.w(l) * (x.row(i) - x.row(l)).transpose();
  }
  return s / e.s0;
}

MatrixXd jacobian_term(const MatrixXd& x, const VectorXd& d, const VectorXd& beta) {
  Agg g(x, d, beta);
  VectorXd c = g.nd.cwiseProduct(g.w) / g.s0;
  return g.b().transpose() * c.asDiagonal() * g.xc;
}

MatrixXd gb_term(const MatrixXd& x, const VectorXd& d, const VectorXd& beta) {
  Agg g(x, d, beta);
  if (g.T == 0 || g.u0 == 0) return MatrixXd::Zero(x.cols(), x.cols());
  MatrixXd xr = g.xc.rowwise() - (g.u1 / g.u0).transpose();
  return (g.T * g.u0 / (g.s0 * g.s0)) * (xr.transpose() * g.w.asDiagonal() * xr);
}

MatrixXd sigma_hat_term(const MatrixXd& x, const VectorXd& d, const VectorXd& beta) {
  Agg g(x, d, beta);
  VectorXd dw = d.cwiseProduct(g.w);
  VectorXd cw = g.nd.cwiseProduct(g.w);
  double p0 = dw.sum();
  VectorXd p1 = g.xc.transpose() * dw;
  MatrixXd p2 = g.xc.transpose() * dw.asDiagonal() * g.xc;
  MatrixXd v2 = g.xc.transpose() * cw.asDiagonal() * g.xc;
  MatrixXd first = p0 * v2 - g.u1 * p1.transpose() - p1 * g.u1.transpose() + g.u0 * p2;
  MatrixXd second = g.a().transpose() * g.w.asDiagonal() * g.b();
  return (first + second) / (g.s0 * g.s0);
}

MatrixXd sigma_tilde_term(const MatrixXd& x, const VectorXd& d, const VectorXd& beta) {
  Agg g(x, d, beta);
  MatrixXd b = g.b();
  MatrixXd lhs = g.a() + g.w.asDiagonal() * b;
  VectorXd c = g.nd.cwiseProduct(g.w);
  return lhs.transpose() * c.asDiagonal() * b / (g.s0 * g.s0);
}

MatrixXd sigma_tilde_sym_term(const MatrixXd& x, const VectorXd& d, const VectorXd& beta) {
  Agg g(x, d, beta);
  if (g.u0 == 0) return MatrixXd::Zero(x.cols(), x.cols());
  MatrixXd a = g.a();
  MatrixXd b = g.b();
  VectorXd c = g.nd.cwiseProduct(g.w);
  VectorXd cb = c.cwiseProduct(g.w);
  return (b.transpose() * cb.asDiagonal() * b + (g.T / g.u0) * (a.transpose() * c.asDiagonal() * a)) /
         (g.s0 * g.s0);
}

VectorXd score(const RiskSets& rs, const VectorXd& beta) {
  VectorXd s = VectorXd::Zero(rs.d);
  for (const auto& r : rs.sets) s += score_term(r.x, r.d, beta);
  return s / rs.n;
}

VectorXd score_pairwise(const RiskSets& rs, const VectorXd& beta) {
  VectorXd s = VectorXd::Zero(rs.d);
  for (const auto& r : rs.sets) s += score_term_pairwise(r.x, r.d, beta);
  return s / rs.n;
}

MatrixXd jacobian(const RiskSets& rs, const VectorXd& beta) {
  MatrixXd h = MatrixXd::Zero(rs.d, rs.d);
  for (const auto& r : rs.sets) h += jacobian_term(r.x, r.d, beta);
  return h / rs.n;
}

MatrixXd jacobian_fd(const RiskSets& rs, const VectorXd& beta, double h) {
  MatrixXd jac(rs.d, rs.d);
  for (int k = 0; k < rs.d; ++k) {
    VectorXd bp = beta, bm = beta;
    bp(k) += h;
    bm(k) -= h;
    jac.col(k) = -(score(rs, bp) - score(rs, bm)) / (2 * h);
  }
  return jac;
}

VectorXd baseline(const RiskSets& rs, const VectorXd& beta) {
  VectorXd b0 = VectorXd::Constant(rs.J, -std::numeric_limits<double>::infinity());
  for (const auto& r : rs.sets) {
    Agg g(r.x, r.d, beta);
    b0(r.j - 1) = g.u0 == 0 ? std::numeric_limits<double>::infinity()
                            : std::log(g.T) - (std::log(g.u0) + g.shift);
  }
  return b0;
}

OddsFit fit(const RiskSets& rs, const SolverOptions& opt, std::optional<VectorXd> init) {
  if (rs.d < 1) throw InputError("at least one covariate is required");
  bool informative = false;
  for (const auto& r : rs.sets) informative = informative || r.events < r.size();
  if (!informative) throw InputError("no risk set with 0 < T_j < n_j");

  OddsFit f;
  f.n = rs.n;
  VectorXd beta;
  if (init) {
    if (init->size() != rs.d) throw InputError("initial value has the wrong length");
    beta = *init;
    f.init = "user";
  } else {
    try {
      beta = prob::fit(rs, opt).gamma;
      f.init = "breslow-peto";
    } catch (const std::exception&) {
      beta = VectorXd::Zero(rs.d);
      f.init = "zero";
    }
  }

  VectorXd s = score(rs, beta);
  int it = 0;
  bool converged = false;
  for (; it < opt.max_iter; ++it) {
    MatrixXd h = f.fd_fallback ? jacobian_fd(rs, beta) : jacobian(rs, beta);
    VectorXd step = inverse_general(h, "Jacobian H") * s;
    if (s.cwiseAbs().maxCoeff() <= opt.tol && small_step(step, beta)) {
      converged = true;
      break;
    }
    if (beta.cwiseAbs().maxCoeff() > opt.divergence_bound)
      throw ConvergenceError("weighted Mantel-Haenszel solver diverges");
    double t = 1;
    VectorXd sn = score(rs, beta + step);
    while (!(sn.norm() < s.norm()) && t > 1e-8) {
      t *= 0.5;
      sn = score(rs, beta + t * step);
    }
    if (!(sn.norm() < s.norm())) {
      if (f.fd_fallback) throw ConvergenceError("line search stalled in the weighted Mantel-Haenszel solver");
      f.fd_fallback = true;
      continue;
    }
    beta += t * step;
    s = sn;
  }
  if (!converged && s.cwiseAbs().maxCoeff() <= opt.tol)
    throw ConvergenceError("weighted Mantel-Haenszel solver diverges: score vanishes while coefficients keep growing");
  if (!converged)
    throw ConvergenceError("weighted Mantel-Haenszel solver did not converge in " + std::to_string(opt.max_iter) +
                           " iterations");
  {
    VectorXd step = inverse_general(jacobian(rs, beta), "Jacobian H") * s;
    VectorXd sn = score(rs, beta + step);
    if (sn.cwiseAbs().maxCoeff() < s.cwiseAbs().maxCoeff()) {
      beta += step;
      s = sn;
    }
  }
  f.beta = beta;
  f.jacobian = jacobian(rs, beta);
  inverse_general(f.jacobian, "Jacobian H");
  f.score_norm = s.cwiseAbs().maxCoeff();
  f.iterations = it;
  f.beta0 = baseline(rs, beta);
  int degenerate = 0;
  for (const auto& r : rs.sets) degenerate += r.events == r.size();
  if (degenerate > 0)
    f.warnings.push_back(std::to_string(degenerate) + " interval(s) with all subjects failing: baseline odds infinite");
  return f;
}

std::vector<OddsFit> multistart(const RiskSets& rs, const SolverOptions& opt) {
  std::vector<OddsFit> out;
  out.push_back(fit(rs, opt, VectorXd::Zero(rs.d)));
  out.back().init = "zero";
  out.push_back(fit(rs, opt));
  return out;
}

MatrixXd influence(const RiskSets& rs, const OddsFit& fit) {
  MatrixXd g = MatrixXd::Zero(rs.n, rs.d);
  for (const auto& r : rs.sets) {
    Agg a(r.x, r.d, fit.beta);
    if (a.u0 == 0) continue;
    VectorXd c = a.u1 / a.u0;
    VectorXd k2 = (a.q1 * a.u0 - a.T * a.u1) / a.s0;
    for (int i = 0; i < r.size(); ++i) {
      double di = r.d(i);
      double wi = a.w(i);
      double s1 = (di * a.u0 - (1 - di) * wi * a.T) / a.s0;
      double s2 = wi / a.s0 - (1 - di) * wi / a.u0;
      g.row(r.members[i]) += s1 * (a.xc.row(i) - c.transpose()) - s2 * k2.transpose();
    }
  }
  return g;
}

MatrixXd meat_robust(const RiskSets& rs, const OddsFit& fit) {
  MatrixXd g = influence(rs, fit);
  return g.transpose() * g / rs.n;
}

MatrixXd meat_model_based(const RiskSets& rs, const OddsFit& fit) {
  MatrixXd m = MatrixXd::Zero(rs.d, rs.d);
  for (const auto& r : rs.sets) m += gb_term(r.x, r.d, fit.beta);
  return m / rs.n;
}

MatrixXd meat_model_based2(const RiskSets& rs, const OddsFit& fit) {
  MatrixXd m = MatrixXd::Zero(rs.d, rs.d);
  for (const auto& r : rs.sets) m += sigma_hat_term(r.x, r.d, fit.beta);
  return symmetrize(m) / rs.n;
}

MatrixXd meat_model_based3(const RiskSets& rs, const OddsFit& fit) {
  MatrixXd m = MatrixXd::Zero(rs.d, rs.d);
  for (const auto& r : rs.sets) m += sigma_tilde_sym_term(r.x, r.d, fit.beta);
  return m / rs.n;
}

namespace {

VarianceEstimate make(VarianceKind kind, const OddsFit& fit, const MatrixXd& meat, int n) {
  return {kind, sandwich(inverse_general(fit.jacobian, "Jacobian H"), meat), n};
}

}  // namespace

VarianceEstimate var_robust(const RiskSets& rs, const OddsFit& fit) {
  return make(VarianceKind::Robust, fit, meat_robust(rs, fit), rs.n);
}

VarianceEstimate var_model_based(const RiskSets& rs, const OddsFit& fit) {
  return make(VarianceKind::ModelBased, fit, meat_model_based(rs, fit), rs.n);
}

VarianceEstimate var_model_based2(const RiskSets& rs, const OddsFit& fit) {
  return make(VarianceKind::ModelBased2, fit, meat_model_based2(rs, fit), rs.n);
}

VarianceEstimate var_model_based3(const RiskSets& rs, const OddsFit& fit) {
  return make(VarianceKind::ModelBased3, fit, meat_model_based3(rs, fit), rs.n);
}

}  // namespace dsurv::odds
