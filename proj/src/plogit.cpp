#include "dsurv/plogit.hpp"

#include "dsurv/linalg.hpp"
#include "kernel.hpp"

#include <cmath>
#include <limits>

namespace dsurv::plogit {

using detail::small_step;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double expit(double x) {
  if (x >= 0) return 1 / (1 + std::exp(-x));
  double e = std::exp(x);
  return e / (1 + e);
}

struct Eval {
  double ll = 0;
  VectorXd g0;  // per included interval
  VectorXd gb;
  VectorXd dd;
  MatrixXd cross;
  MatrixXd eb;
};

// rs.sets positions of the included intervals
std::vector<int> positions(const RiskSets& rs, const std::vector<int>& included) {
  std::vector<int> pos;
  std::size_t k = 0;
  for (int p = 0; p < static_cast<int>(rs.sets.size()) && k < included.size(); ++p)
    if (rs.sets[p].j == included[k]) {
      pos.push_back(p);
      ++k;
    }
  return pos;
}

Eval evaluate(const RiskSets& rs, const std::vector<int>& pos, const VectorXd& b0, const VectorXd& beta,
              bool derivs) {
  const int m = static_cast<int>(pos.size());
  Eval ev;
  ev.g0 = VectorXd::Zero(m);
  ev.gb = VectorXd::Zero(rs.d);
  if (derivs) {
    ev.dd = VectorXd::Zero(m);
    ev.cross = MatrixXd::Zero(rs.d, m);
    ev.eb = MatrixXd::Zero(rs.d, rs.d);
  }
  for (int k = 0; k < m; ++k) {
    const auto& s = rs.sets[pos[k]];
    VectorXd eta = (s.x * beta).array() + b0(k);
    VectorXd r(s.size());
    VectorXd v(s.size());
    for (int i = 0; i < s.size(); ++i) {
      ev.ll += s.d(i) * eta(i) - softplus(eta(i));
      double p = expit(eta(i));
      r(i) = s.d(i) - p;
      v(i) = p * (1 - p);
    }
    ev.g0(k) = r.sum();
    ev.gb += s.x.transpose() * r;
    if (derivs) {
      ev.dd(k) = v.sum();
      ev.cross.col(k) = s.x.transpose() * v;
      ev.eb += s.x.transpose() * v.asDiagonal() * s.x;
    }
  }
  return ev;
}

double max_grad(const Eval& ev) {
  double g = ev.gb.size() ? ev.gb.cwiseAbs().maxCoeff() : 0;
  if (ev.g0.size()) g = std::max(g, ev.g0.cwiseAbs().maxCoeff());
  return g;
}

MatrixXd schur(const Eval& ev) {
  MatrixXd s = ev.eb;
  for (int k = 0; k < ev.dd.size(); ++k) s -= ev.cross.col(k) * ev.cross.col(k).transpose() / ev.dd(k);
  return symmetrize(s);
}

}  // namespace

MatrixXd PlogitFit::fisher() const {
  const int m = static_cast<int>(info_intercepts.size());
  const int d = static_cast<int>(info_beta.rows());
  MatrixXd f = MatrixXd::Zero(m + d, m + d);
  f.topLeftCorner(m, m) = info_intercepts.asDiagonal();
  f.topRightCorner(m, d) = info_cross.transpose();
  f.bottomLeftCorner(d, m) = info_cross;
  f.bottomRightCorner(d, d) = info_beta;
  return f;
}

double loglik(const RiskSets& rs, const std::vector<int>& included, const VectorXd& beta0, const VectorXd& beta) {
  auto pos = positions(rs, included);
  VectorXd b0(pos.size());
  for (std::size_t k = 0; k < pos.size(); ++k) b0(k) = beta0(rs.sets[pos[k]].j - 1);
  return evaluate(rs, pos, b0, beta, false).ll;
}

PlogitFit fit(const RiskSets& rs, const SolverOptions& opt) {
  if (rs.d < 1) throw InputError("at least one covariate is required");
  PlogitFit f;
  f.n = rs.n;
  std::vector<int> pos;
  int dropped = 0;
  for (int p = 0; p < static_cast<int>(rs.sets.size()); ++p) {
    if (rs.sets[p].events < rs.sets[p].size()) {
      pos.push_back(p);
      f.included.push_back(rs.sets[p].j);
    } else {
      ++dropped;
    }
  }
  if (pos.empty()) throw InputError("no interval with 0 < T_j < n_j");
  if (dropped > 0)
    f.warnings.push_back(std::to_string(dropped) + " interval(s) with T_j = n_j excluded (intercept unbounded)");
  int empty = 0;
  for (int j = 0; j < rs.J; ++j) empty += rs.summary.n[j] > 0 && rs.summary.T[j] == 0;
  if (empty > 0) f.warnings.push_back(std::to_string(empty) + " interval(s) without events excluded");

  const int m = static_cast<int>(pos.size());
  VectorXd b0(m);
  for (int k = 0; k < m; ++k) {
    double t = rs.sets[pos[k]].events;
    double nj = rs.sets[pos[k]].size();
    b0(k) = std::log(t / (nj - t));
  }
  VectorXd beta = VectorXd::Zero(rs.d);
  Eval ev = evaluate(rs, pos, b0, beta, true);
  int it = 0;
  bool converged = false;
  for (; it < opt.max_iter; ++it) {
    MatrixXd sinv = inverse_spd(schur(ev), "pooled logistic information");
    VectorXd rhs = ev.gb;
    for (int k = 0; k < m; ++k) rhs -= ev.cross.col(k) * ev.g0(k) / ev.dd(k);
    VectorXd db = sinv * rhs;
    VectorXd d0(m);
    for (int k = 0; k < m; ++k) d0(k) = (ev.g0(k) - ev.cross.col(k).dot(db)) / ev.dd(k);
    if (max_grad(ev) / rs.n <= opt.tol && small_step(db, beta) && small_step(d0, b0)) {
      converged = true;
      break;
    }
    if (beta.cwiseAbs().maxCoeff() > opt.divergence_bound)
      throw ConvergenceError("pooled logistic fit diverges (separation)");
    double t = 1;
    Eval next = evaluate(rs, pos, b0 + d0, beta + db, true);
    const double slack = 1e-12 * (1 + std::abs(ev.ll));
    while (!(next.ll >= ev.ll - slack) && t > 1e-10) {
      t *= 0.5;
      next = evaluate(rs, pos, b0 + t * d0, beta + t * db, true);
    }
    b0 += t * d0;
    beta += t * db;
    ev = std::move(next);
  }
  if (!converged && max_grad(ev) / rs.n <= opt.tol)
    throw ConvergenceError("pooled logistic fit diverges (separation)");
  if (!converged)
    throw ConvergenceError("pooled logistic fit did not converge in " + std::to_string(opt.max_iter) + " iterations");

  f.beta = beta;
  f.beta0 = VectorXd::Constant(rs.J, std::numeric_limits<double>::quiet_NaN());
  for (int k = 0; k < m; ++k) f.beta0(rs.sets[pos[k]].j - 1) = b0(k);
  f.loglik = ev.ll;
  f.score_norm = max_grad(ev) / rs.n;
  f.iterations = it;
  f.info_intercepts = ev.dd;
  f.info_cross = ev.cross;
  f.info_beta = ev.eb;
  return f;
}

PlogitVariances variances(const RiskSets& rs, const PlogitFit& fit) {
  auto pos = positions(rs, fit.included);
  const int m = static_cast<int>(pos.size());
  Eval info;
  info.dd = fit.info_intercepts;
  info.cross = fit.info_cross;
  info.eb = fit.info_beta;
  MatrixXd sinv = inverse_spd(schur(info), "pooled logistic information");

  // beta-block of I^{-1} u_i is S^{-1} sum_k r_ik (x_ik - C_k / D_k)
  MatrixXd psi = MatrixXd::Zero(rs.n, rs.d);
  for (int k = 0; k < m; ++k) {
    const auto& s = rs.sets[pos[k]];
    VectorXd centre = fit.info_cross.col(k) / fit.info_intercepts(k);
    VectorXd eta = (s.x * fit.beta).array() + fit.beta0(s.j - 1);
    for (int i = 0; i < s.size(); ++i) {
      double r = s.d(i) - 1 / (1 + std::exp(-eta(i)));
      psi.row(s.members[i]) += r * (s.x.row(i) - centre.transpose());
    }
  }
  MatrixXd meat = psi.transpose() * psi;
  PlogitVariances v;
  v.model_based = {VarianceKind::ModelBased, rs.n * sinv, rs.n};
  v.robust = {VarianceKind::Robust, rs.n * sandwich(sinv, meat), rs.n};
  return v;
}

}  // namespace dsurv::plogit
