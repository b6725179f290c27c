#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dsurv/linalg.hpp"
#include "dsurv/odds.hpp"
#include "dsurv/prob.hpp"
#include "dsurv/sim.hpp"
#include "oracles.hpp"

using namespace dsurv;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd logistic_p(const MatrixXd& x, double alpha, const VectorXd& b) {
  VectorXd eta = (x * b).array() + alpha;
  return (1.0 / (1.0 + (-eta.array()).exp())).matrix();
}

}  // namespace

TEST_CASE("risk-set kernels match the literal sums") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nrm(0, .5);
  for (int rep = 0; rep < 40; ++rep) {
    auto s = oracle::random_set(rng, 3 + rep % 9, 1 + rep % 4, .4, rep % 3 == 0);
    VectorXd b(s.x.cols());
    for (int k = 0; k < b.size(); ++k) b(k) = nrm(rng);
    VectorXd sc = oracle::wmh_score(s, b);
    CHECK(oracle::rel_diff(odds::score_term(s.x, s.d, b), sc) < 1e-12);
    CHECK(oracle::rel_diff(odds::score_term_pairwise(s.x, s.d, b), sc) < 1e-12);
    CHECK(oracle::rel_diff(odds::jacobian_term(s.x, s.d, b), oracle::wmh_h(s, b)) < 1e-12);
    CHECK(oracle::rel_diff(odds::gb_term(s.x, s.d, b), oracle::wmh_gb(s, b)) < 1e-12);
    CHECK(oracle::rel_diff(odds::sigma_hat_term(s.x, s.d, b), oracle::wmh_sigma_hat(s, b)) < 1e-12);
    CHECK(oracle::rel_diff(odds::sigma_tilde_term(s.x, s.d, b), oracle::wmh_sigma_tilde(s, b)) < 1e-12);
    CHECK(oracle::rel_diff(odds::sigma_tilde_sym_term(s.x, s.d, b), oracle::wmh_sigma_tilde_sym(s, b)) < 1e-12);
  }
}

TEST_CASE("the two sigma-tilde forms agree and the symmetric one is PSD") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 30; ++rep) {
    auto s = oracle::random_set(rng, 2 + rep % 10, 1 + rep % 3, .5);
    VectorXd b = VectorXd::Random(s.x.cols());
    MatrixXd asym = oracle::wmh_sigma_tilde(s, b);
    MatrixXd sym = oracle::wmh_sigma_tilde_sym(s, b);
    CHECK(oracle::rel_diff(asym, sym) < 1e-12);
    CHECK(min_eigenvalue(sym) > -1e-12 * std::max(1.0, sym.norm()));
  }
}

TEST_CASE("Jacobian is the derivative of the negative score") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    auto s = oracle::random_set(rng, 4 + rep, 2, .4);
    VectorXd b = VectorXd::Random(2) * .5;
    auto f = [&](const VectorXd& v) { return VectorXd(-odds::score_term(s.x, s.d, v)); };
    CHECK(oracle::rel_diff(oracle::jacobian_fd(f, b), odds::jacobian_term(s.x, s.d, b)) < 1e-7);
  }
  RiskSets rs(oracle::random_data(rng, 100, 3, 5, .6, true));
  VectorXd b = VectorXd::Random(3) * .3;
  CHECK(oracle::rel_diff(odds::jacobian_fd(rs, b), odds::jacobian(rs, b)) < 1e-7);
  CHECK(oracle::rel_diff(odds::score_pairwise(rs, b), odds::score(rs, b)) < 1e-12);
}

TEST_CASE("fit, influence and sandwiches") {
  std::mt19937_64 rng(4);
  RiskSets rs(oracle::random_data(rng, 150, 2, 6));
  auto f = odds::fit(rs);
  CHECK(odds::score(rs, f.beta).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(f.init == "breslow-peto");
  VectorXd root = oracle::solve([&](const VectorXd& v) { return odds::score(rs, v); }, VectorXd::Zero(2));
  CHECK(oracle::max_abs(root - f.beta) < 1e-7);
  auto starts = odds::multistart(rs);
  REQUIRE(starts.size() == 2);
  CHECK(oracle::max_abs(starts[0].beta - starts[1].beta) < 1e-8);

  MatrixXd g = MatrixXd::Zero(rs.n, rs.d), h = MatrixXd::Zero(rs.d, rs.d);
  MatrixXd gb = h, sh = h, st = h;
  for (const auto& s : rs.sets) {
    oracle::Set os{s.x, s.d};
    MatrixXd gj = oracle::wmh_g(os, f.beta);
    for (int k = 0; k < s.size(); ++k) g.row(s.members[k]) += gj.row(k);
    h += oracle::wmh_h(os, f.beta);
    gb += oracle::wmh_gb(os, f.beta);
    sh += oracle::wmh_sigma_hat(os, f.beta);
    st += oracle::wmh_sigma_tilde_sym(os, f.beta);
  }
  CHECK(oracle::rel_diff(odds::influence(rs, f), g) < 1e-11);
  CHECK(oracle::max_abs(g.colwise().sum()) < 1e-7);
  MatrixXd hi = h.inverse();
  auto sand = [&](const MatrixXd& m) { return MatrixXd(hi * m * hi.transpose()); };
  CHECK(oracle::rel_diff(odds::var_robust(rs, f).covariance(), sand(g.transpose() * g)) < 1e-10);
  CHECK(oracle::rel_diff(odds::var_model_based(rs, f).covariance(), sand(gb)) < 1e-10);
  CHECK(oracle::rel_diff(odds::var_model_based2(rs, f).covariance(), sand(.5 * (sh + sh.transpose()))) < 1e-10);
  CHECK(oracle::rel_diff(odds::var_model_based3(rs, f).covariance(), sand(st)) < 1e-10);
}

TEST_CASE("without ties the odds fit is the Breslow-Peto fit") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    RiskSets rs(oracle::random_untied(rng, 60, 3));
    auto p = prob::fit(rs);
    auto o = odds::fit(rs);
    CHECK(oracle::max_abs(o.beta - p.gamma) < 1e-9);
    CHECK(oracle::max_abs(o.jacobian - p.hessian) < 1e-9);
    CHECK(oracle::max_abs(odds::meat_model_based2(rs, o) - p.hessian) < 1e-9);
  }
}

TEST_CASE("enumeration: tau unbiased, sigma estimators unbiased given T") {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 8; ++rep) {
    const int m = 3 + rep % 6, d = 1 + rep % 3;
    auto s = oracle::random_set(rng, m, d);
    VectorXd b = VectorXd::Random(d) * .5;
    const double alpha = -.5;
    VectorXd p = logistic_p(s.x, alpha, b);
    auto tau = oracle::enumerate(p, [&](const VectorXd& dd) { return oracle::wmh_score({s.x, dd}, b); });
    CHECK(tau.mean.cwiseAbs().maxCoeff() < 1e-12);
    auto lib = sim::enumerate_odds(s.x, alpha, b);
    CHECK(oracle::max_abs(lib.mean_score - tau.mean) < 1e-12);
    CHECK(oracle::max_abs(lib.var_score - tau.cov()) < 1e-12);

    for (int t = 1; t < m; ++t) {
      auto tt = oracle::enumerate(p, [&](const VectorXd& dd) { return oracle::wmh_score({s.x, dd}, b); }, t);
      auto sh = oracle::enumerate(
          p, [&](const VectorXd& dd) { return oracle::flat(oracle::wmh_sigma_hat({s.x, dd}, b)); }, t);
      auto st = oracle::enumerate(
          p, [&](const VectorXd& dd) { return oracle::flat(oracle::wmh_sigma_tilde({s.x, dd}, b)); }, t);
      CHECK(tt.mean.cwiseAbs().maxCoeff() < 1e-12);
      CHECK(oracle::max_abs(oracle::unflat(sh.mean, d) - tt.cov()) < 1e-12);
      CHECK(oracle::max_abs(oracle::unflat(st.mean, d) - tt.cov()) < 1e-12);
      auto lt = sim::enumerate_odds(s.x, alpha, b, t);
      CHECK(oracle::max_abs(lt.mean_sigma_hat - oracle::unflat(sh.mean, d)) < 1e-12);
      CHECK(oracle::max_abs(lt.mean_sigma_tilde - oracle::unflat(st.mean, d)) < 1e-12);
      CHECK(oracle::max_abs(lt.mean_sigma_tilde_sym - oracle::unflat(st.mean, d)) < 1e-12);
    }
  }
}

TEST_CASE("separated data diverge") {
  std::vector<SubjectRecord> s(6);
  const double x[] = {5, 4, 3, 2, 1, 0};
  const int y[] = {1, 2, 3, 4, 4, 4};
  for (int i = 0; i < 6; ++i) {
    s[i].id = std::to_string(i);
    s[i].y_index = y[i];
    s[i].delta = i < 4;
    s[i].x = CovariatePath(Eigen::RowVectorXd(Eigen::RowVectorXd::Constant(1, x[i])));
  }
  DiscreteSurvivalData data(TimeGrid({1, 2, 3, 4}), s, {"x"});
  CHECK_THROWS_AS(odds::fit(RiskSets(data), {}, VectorXd::Zero(1)), ConvergenceError);
}

TEST_CASE("degenerate inputs") {
  std::mt19937_64 rng(7);
  auto data = oracle::random_data(rng, 40, 1, 3);
  std::vector<SubjectRecord> all = data.subjects();
  for (auto& s : all) {
    s.y_index = 1;
    s.delta = true;
  }
  CHECK_THROWS_AS(odds::fit(DiscreteSurvivalData(data.grid(), all, data.names())), InputError);
  RiskSets rs(data);
  CHECK_THROWS_AS(odds::fit(rs, {}, VectorXd::Zero(3)), InputError);
}
