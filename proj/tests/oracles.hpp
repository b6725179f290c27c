#pragma once
// Slow, literal implementations used as references in the tests.

#include "dsurv/data.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double rel_diff(const MatrixXd& a, const MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

inline double max_abs(const MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

// risk set of size m with d covariates and random events; at least one event and one non-event when possible
struct Set {
  MatrixXd x;
  VectorXd d;
};

inline Set random_set(std::mt19937_64& rng, int m, int d, double event_p = .4, bool discrete_x = false) {
  std::normal_distribution<double> nrm(0, 1);
  std::bernoulli_distribution ev(event_p), coin(.5);
  Set s{MatrixXd(m, d), VectorXd(m)};
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < d; ++k) s.x(i, k) = discrete_x ? (coin(rng) ? 1.0 : 0.0) : nrm(rng);
    s.d(i) = ev(rng) ? 1 : 0;
  }
  if (m >= 2) {
    s.d(0) = 1;
    s.d(m - 1) = 0;
  }
  return s;
}

// Subjects on grid 1..J with heavy ties, static normal covariates.
inline dsurv::DiscreteSurvivalData random_data(std::mt19937_64& rng, int n, int d, int J, double event_p = .7,
                                               bool time_varying = false) {
  std::normal_distribution<double> nrm(0, 1);
  std::uniform_int_distribution<int> yd(1, J);
  std::bernoulli_distribution ev(event_p);
  std::vector<dsurv::SubjectRecord> s(n);
  for (int i = 0; i < n; ++i) {
    s[i].id = std::to_string(i + 1);
    s[i].y_index = yd(rng);
    s[i].delta = ev(rng);
    if (time_varying) {
      MatrixXd rows(J, d);
      for (int j = 0; j < J; ++j)
        for (int k = 0; k < d; ++k) rows(j, k) = nrm(rng);
      s[i].x = dsurv::CovariatePath(rows);
    } else {
      Eigen::RowVectorXd x(d);
      for (int k = 0; k < d; ++k) x(k) = nrm(rng);
      s[i].x = dsurv::CovariatePath(x);
    }
  }
  std::vector<double> grid(J);
  for (int j = 0; j < J; ++j) grid[j] = j + 1;
  std::vector<std::string> names;
  for (int k = 0; k < d; ++k) names.push_back("x" + std::to_string(k + 1));
  return dsurv::DiscreteSurvivalData(dsurv::TimeGrid(grid), std::move(s), names);
}

// Continuous times, all distinct, discretized on the sorted unique times.
inline dsurv::DiscreteSurvivalData random_untied(std::mt19937_64& rng, int n, int d) {
  std::normal_distribution<double> nrm(0, 1);
  std::exponential_distribution<double> ex(1.0);
  std::bernoulli_distribution ev(.75);
  std::vector<dsurv::RawRecord> r(n);
  std::vector<double> t;
  for (int i = 0; i < n; ++i) {
    r[i].id = std::to_string(i + 1);
    r[i].x.resize(d);
    for (int k = 0; k < d; ++k) r[i].x(k) = nrm(rng);
    r[i].time = ex(rng) * std::exp(-.3 * r[i].x(0));
    r[i].status = ev(rng);
    t.push_back(r[i].time);
  }
  std::vector<std::string> names;
  for (int k = 0; k < d; ++k) names.push_back("x" + std::to_string(k + 1));
  return dsurv::discretize(r, dsurv::TimeGrid::from_times(t), dsurv::CensorOption::CensoredEarly, names);
}

inline VectorXd ew(const MatrixXd& x, const VectorXd& b) { return (x * b).array().exp().matrix(); }

// ---- probability model, per risk set, no 1/n ----

inline VectorXd bp_score(const Set& s, const VectorXd& g) {
  VectorXd w = ew(s.x, g);
  double T = s.d.sum(), S0 = w.sum();
  VectorXd out = VectorXd::Zero(s.x.cols());
  for (int i = 0; i < s.x.rows(); ++i) out += (s.d(i) - T * w(i) / S0) * s.x.row(i).transpose();
  return out;
}

inline MatrixXd bp_hessian(const Set& s, const VectorXd& g) {
  VectorXd w = ew(s.x, g);
  double T = s.d.sum(), S0 = w.sum();
  VectorXd xbar = s.x.transpose() * w / S0;
  MatrixXd out = MatrixXd::Zero(s.x.cols(), s.x.cols());
  for (int i = 0; i < s.x.rows(); ++i) {
    VectorXd c = s.x.row(i).transpose() - xbar;
    out += T * w(i) / S0 * c * c.transpose();
  }
  return out;
}

inline MatrixXd bp_ab(const Set& s, const VectorXd& g) {
  VectorXd w = ew(s.x, g);
  double T = s.d.sum(), S0 = w.sum();
  VectorXd xbar = s.x.transpose() * w / S0;
  MatrixXd out = MatrixXd::Zero(s.x.cols(), s.x.cols());
  for (int i = 0; i < s.x.rows(); ++i) {
    double p = T * w(i) / S0;
    VectorXd c = s.x.row(i).transpose() - xbar;
    out += p * (1 - p) * c * c.transpose();
  }
  return out;
}

// triple sum exactly as displayed
inline MatrixXd bp_v(const Set& s, const VectorXd& g) {
  VectorXd w = ew(s.x, g);
  const int m = s.x.rows();
  double S0 = w.sum();
  MatrixXd out = MatrixXd::Zero(s.x.cols(), s.x.cols());
  for (int i = 0; i < m; ++i) {
    if (s.d(i) == 1) continue;
    VectorXd a = VectorXd::Zero(s.x.cols()), b = VectorXd::Zero(s.x.cols());
    for (int l = 0; l < m; ++l) a += w(l) * (s.x.row(i) - s.x.row(l)).transpose();
    for (int k = 0; k < m; ++k) b += s.d(k) * (s.x.row(i) - s.x.row(k)).transpose();
    out += w(i) * a * b.transpose() / (S0 * S0);
  }
  return out;
}

// per-member h_j(i)
inline MatrixXd bp_h(const Set& s, const VectorXd& g) {
  VectorXd w = ew(s.x, g);
  double T = s.d.sum(), S0 = w.sum();
  VectorXd xbar = s.x.transpose() * w / S0;
  MatrixXd out(s.x.rows(), s.x.cols());
  for (int i = 0; i < s.x.rows(); ++i)
    out.row(i) = (s.d(i) - T * w(i) / S0) * (s.x.row(i) - xbar.transpose());
  return out;
}

// ---- odds model, per risk set, no 1/n ----

inline VectorXd wmh_score(const Set& s, const VectorXd& b) {
  VectorXd w = ew(s.x, b);
  const int m = s.x.rows();
  double T = s.d.sum(), S0 = w.sum(), U0 = 0;
  for (int l = 0; l < m; ++l) U0 += (1 - s.d(l)) * w(l);
  VectorXd out = VectorXd::Zero(s.x.cols());
  for (int i = 0; i < m; ++i) out += (s.d(i) * U0 - (1 - s.d(i)) * w(i) * T) / S0 * s.x.row(i).transpose();
  return out;
}

inline MatrixXd wmh_h(const Set& s, const VectorXd& b) {
  VectorXd w = ew(s.x, b);
  const int m = s.x.rows();
  double S0 = w.sum();
  VectorXd xbar = s.x.transpose() * w / S0;
  MatrixXd out = MatrixXd::Zero(s.x.cols(), s.x.cols());
  for (int i = 0; i < m; ++i) {
    VectorXd a = VectorXd::Zero(s.x.cols());
    for (int l = 0; l < m; ++l) a += s.d(l) * (s.x.row(i) - s.x.row(l)).transpose();
    out += (1 - s.d(i)) * w(i) / S0 * a * (s.x.row(i) - xbar.transpose());
  }
  return out;
}

inline MatrixXd wmh_gb(const Set& s, const VectorXd& b) {
  VectorXd w = ew(s.x, b);
  const int m = s.x.rows();
  double T = s.d.sum(), S0 = w.sum(), U0 = 0;
  VectorXd U1 = VectorXd::Zero(s.x.cols());
  for (int l = 0; l < m; ++l) {
    U0 += (1 - s.d(l)) * w(l);
    U1 += (1 - s.d(l)) * w(l) * s.x.row(l).transpose();
  }
  MatrixXd out = MatrixXd::Zero(s.x.cols(), s.x.cols());
  if (U0 == 0 || T == 0) return out;
  double eb0 = T / U0;
  for (int i = 0; i < m; ++i) {
    VectorXd c = s.x.row(i).transpose() - U1 / U0;
    out += w(i) * eb0 * U0 * U0 / (S0 * S0) * c * c.transpose();
  }
  return out;
}

inline MatrixXd wmh_sigma_hat(const Set& s, const VectorXd& b) {
  VectorXd w = ew(s.x, b);
  const int m = s.x.rows(), p = s.x.cols();
  double S0 = w.sum();
  MatrixXd out = MatrixXd::Zero(p, p);
  for (int i = 0; i < m; ++i) {
    MatrixXd first = MatrixXd::Zero(p, p);
    for (int l = 0; l < m; ++l) {
      VectorXd c = (s.x.row(i) - s.x.row(l)).transpose();
      first += s.d(l) * w(l) * c * c.transpose();
    }
    out += (1 - s.d(i)) * w(i) * first / (S0 * S0);
    VectorXd a = VectorXd::Zero(p), bb = VectorXd::Zero(p);
    for (int l = 0; l < m; ++l) a += (1 - s.d(l)) * w(l) * (s.x.row(i) - s.x.row(l)).transpose();
    for (int k = 0; k < m; ++k) bb += s.d(k) * (s.x.row(i) - s.x.row(k)).transpose();
    out += w(i) * a * bb.transpose() / (S0 * S0);
  }
  return out;
}

inline MatrixXd wmh_sigma_tilde(const Set& s, const VectorXd& b) {
  VectorXd w = ew(s.x, b);
  const int m = s.x.rows(), p = s.x.cols();
  double S0 = w.sum();
  MatrixXd out = MatrixXd::Zero(p, p);
  for (int i = 0; i < m; ++i) {
    if (s.d(i) == 1) continue;
    VectorXd a = VectorXd::Zero(p), bb = VectorXd::Zero(p);
    for (int l = 0; l < m; ++l)
      a += ((1 - s.d(l)) * w(l) + s.d(l) * w(i)) * (s.x.row(i) - s.x.row(l)).transpose();
    for (int k = 0; k < m; ++k) bb += s.d(k) * (s.x.row(i) - s.x.row(k)).transpose();
    out += w(i) * a * bb.transpose() / (S0 * S0);
  }
  return out;
}

inline MatrixXd wmh_sigma_tilde_sym(const Set& s, const VectorXd& b) {
  VectorXd w = ew(s.x, b);
  const int m = s.x.rows(), p = s.x.cols();
  double S0 = w.sum(), T = s.d.sum(), U0 = 0;
  for (int l = 0; l < m; ++l) U0 += (1 - s.d(l)) * w(l);
  MatrixXd out = MatrixXd::Zero(p, p);
  for (int i = 0; i < m; ++i) {
    if (s.d(i) == 1) continue;
    VectorXd a = VectorXd::Zero(p), c = VectorXd::Zero(p);
    for (int l = 0; l < m; ++l) {
      a += s.d(l) * (s.x.row(i) - s.x.row(l)).transpose();
      c += (1 - s.d(l)) * w(l) * (s.x.row(i) - s.x.row(l)).transpose();
    }
    out += w(i) * (w(i) * a * a.transpose() + T / U0 * c * c.transpose()) / (S0 * S0);
  }
  return out;
}

// per-member g_j1 + g_j2 with raw coordinates
inline MatrixXd wmh_g(const Set& s, const VectorXd& b) {
  VectorXd w = ew(s.x, b);
  const int m = s.x.rows(), p = s.x.cols();
  double S0 = w.sum(), T = s.d.sum(), U0 = 0;
  VectorXd U1 = VectorXd::Zero(p), Q1 = VectorXd::Zero(p);
  for (int l = 0; l < m; ++l) {
    U0 += (1 - s.d(l)) * w(l);
    U1 += (1 - s.d(l)) * w(l) * s.x.row(l).transpose();
    Q1 += s.d(l) * s.x.row(l).transpose();
  }
  MatrixXd out = MatrixXd::Zero(m, p);
  if (U0 == 0) return out;
  VectorXd k2 = (Q1 * U0 - U1 * T) / S0;
  for (int i = 0; i < m; ++i) {
    VectorXd g1 = (s.d(i) * U0 - (1 - s.d(i)) * w(i) * T) / S0 * (s.x.row(i).transpose() - U1 / U0);
    VectorXd g2 = -k2 * (w(i) / S0 - (1 - s.d(i)) * w(i) / U0);
    out.row(i) = (g1 + g2).transpose();
  }
  return out;
}

// ---- generic helpers ----

// central differences of f: R^p -> R^q, returns q x p
inline MatrixXd jacobian_fd(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& at, double h = 1e-6) {
  VectorXd f0 = f(at);
  MatrixXd J(f0.size(), at.size());
  for (int k = 0; k < at.size(); ++k) {
    VectorXd a = at, b = at;
    a(k) += h;
    b(k) -= h;
    J.col(k) = (f(a) - f(b)) / (2 * h);
  }
  return J;
}

// Newton with a finite-difference Jacobian; for small smooth systems
inline VectorXd solve(const std::function<VectorXd(const VectorXd&)>& f, VectorXd x, double tol = 1e-13) {
  for (int it = 0; it < 100; ++it) {
    VectorXd v = f(x);
    if (v.cwiseAbs().maxCoeff() < tol) break;
    MatrixXd J = jacobian_fd(f, x, 1e-7);
    VectorXd step = J.fullPivLu().solve(-v);
    double t = 1;
    while (t > 1e-8 && f(x + t * step).norm() > v.norm()) t *= .5;
    x += t * step;
  }
  return x;
}

// E over all 2^m event patterns with independent P(D_i = 1) = p_i, optionally conditional on sum D = t.
// f returns a flattened quantity; the result holds E f and E f f^T.
struct Moments {
  VectorXd mean;
  MatrixXd second;
  MatrixXd cov() const { return second - mean * mean.transpose(); }
};

inline Moments enumerate(const VectorXd& p, const std::function<VectorXd(const VectorXd&)>& f, int given_t = -1) {
  const int m = p.size();
  Moments out;
  double total = 0;
  for (long mask = 0; mask < (1L << m); ++mask) {
    VectorXd d(m);
    double pr = 1;
    int t = 0;
    for (int i = 0; i < m; ++i) {
      d(i) = (mask >> i) & 1;
      t += static_cast<int>(d(i));
      pr *= d(i) == 1 ? p(i) : 1 - p(i);
    }
    if (given_t >= 0 && t != given_t) continue;
    VectorXd v = f(d);
    if (out.mean.size() == 0) {
      out.mean = VectorXd::Zero(v.size());
      out.second = MatrixXd::Zero(v.size(), v.size());
    }
    out.mean += pr * v;
    out.second += pr * v * v.transpose();
    total += pr;
  }
  out.mean /= total;
  out.second /= total;
  return out;
}

inline VectorXd flat(const MatrixXd& a) { return Eigen::Map<const VectorXd>(a.data(), a.size()); }
inline MatrixXd unflat(const VectorXd& v, int rows) { return Eigen::Map<const MatrixXd>(v.data(), rows, v.size() / rows); }

}  // namespace oracle
