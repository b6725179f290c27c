#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dsurv/linalg.hpp"
#include "dsurv/prob.hpp"
#include "dsurv/sim.hpp"
#include "oracles.hpp"

using namespace dsurv;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

DiscreteSurvivalData tiny(const std::vector<int>& y, const std::vector<int>& delta, const std::vector<double>& x,
                          int J) {
  std::vector<SubjectRecord> s(y.size());
  for (size_t i = 0; i < y.size(); ++i) {
    s[i].id = std::to_string(i);
    s[i].y_index = y[i];
    s[i].delta = delta[i];
    s[i].x = CovariatePath(Eigen::RowVectorXd(Eigen::RowVectorXd::Constant(1, x[i])));
  }
  std::vector<double> g(J);
  for (int j = 0; j < J; ++j) g[j] = j + 1;
  return DiscreteSurvivalData(TimeGrid(g), s, {"x"});
}

}  // namespace

TEST_CASE("risk-set kernels match the literal sums") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nrm(0, .5);
  for (int rep = 0; rep < 40; ++rep) {
    auto s = oracle::random_set(rng, 3 + rep % 9, 1 + rep % 4, .4, rep % 3 == 0);
    VectorXd g(s.x.cols());
    for (int k = 0; k < g.size(); ++k) g(k) = nrm(rng);
    CHECK(oracle::rel_diff(prob::score_term(s.x, s.d, g), oracle::bp_score(s, g)) < 1e-12);
    CHECK(oracle::rel_diff(prob::score_term_exchange(s.x, s.d, g), oracle::bp_score(s, g)) < 1e-12);
    CHECK(oracle::rel_diff(prob::hessian_term(s.x, s.d, g), oracle::bp_hessian(s, g)) < 1e-12);
    CHECK(oracle::rel_diff(prob::ab_term(s.x, s.d, g), oracle::bp_ab(s, g)) < 1e-12);
    CHECK(oracle::rel_diff(prob::v_term(s.x, s.d, g), oracle::bp_v(s, g)) < 1e-12);
  }
}

TEST_CASE("score is the gradient of the objective and B its negative Hessian") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    RiskSets rs(oracle::random_data(rng, 80, 3, 6, .6, rep % 2 == 1));
    VectorXd g = VectorXd::Random(3) * .4;
    auto obj = [&](const VectorXd& v) { return VectorXd::Constant(1, prob::objective(rs, v)); };
    MatrixXd grad = oracle::jacobian_fd(obj, g, 1e-5);
    CHECK(oracle::rel_diff(grad.transpose(), prob::score(rs, g)) < 1e-7);
    auto sc = [&](const VectorXd& v) { return prob::score(rs, v); };
    CHECK(oracle::rel_diff(-oracle::jacobian_fd(sc, g), prob::hessian(rs, g)) < 1e-7);
    CHECK(oracle::rel_diff(prob::score_exchange(rs, g), prob::score(rs, g)) < 1e-12);
  }
}

TEST_CASE("fit solves the estimating equation") {
  std::mt19937_64 rng(3);
  RiskSets rs(oracle::random_data(rng, 150, 3, 5));
  auto f = prob::fit(rs);
  CHECK(prob::score(rs, f.gamma).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(oracle::rel_diff(f.hessian, prob::hessian(rs, f.gamma)) < 1e-12);
  // independent root finder
  VectorXd root = oracle::solve([&](const VectorXd& v) { return prob::score(rs, v); }, VectorXd::Zero(3));
  CHECK(oracle::max_abs(root - f.gamma) < 1e-7);
  for (const auto& s : rs.sets) {
    VectorXd w = oracle::ew(s.x, f.gamma);
    CHECK(f.gamma0(s.j - 1) == doctest::Approx(std::log(s.d.sum() / w.sum())).epsilon(1e-12));
  }
}

TEST_CASE("influence and sandwich variances") {
  std::mt19937_64 rng(4);
  auto data = oracle::random_data(rng, 120, 2, 6);
  RiskSets rs(data);
  auto f = prob::fit(rs);
  MatrixXd h = MatrixXd::Zero(rs.n, rs.d);
  MatrixXd ab = MatrixXd::Zero(rs.d, rs.d), v = ab, b = ab;
  for (const auto& s : rs.sets) {
    oracle::Set os{s.x, s.d};
    MatrixXd hj = oracle::bp_h(os, f.gamma);
    for (int k = 0; k < s.size(); ++k) h.row(s.members[k]) += hj.row(k);
    ab += oracle::bp_ab(os, f.gamma);
    v += oracle::bp_v(os, f.gamma);
    b += oracle::bp_hessian(os, f.gamma);
  }
  CHECK(oracle::rel_diff(prob::influence(rs, f), h) < 1e-12);
  // influences sum to n times the score, which is zero at the root
  CHECK(oracle::max_abs(h.colwise().sum()) < 1e-7);
  MatrixXd binv = b.inverse();
  const int n = rs.n;
  CHECK(oracle::rel_diff(prob::var_naive(rs, f).covariance(), binv) < 1e-10);
  CHECK(oracle::rel_diff(prob::var_robust(rs, f).covariance(), binv * h.transpose() * h * binv) < 1e-10);
  CHECK(oracle::rel_diff(prob::var_model_based(rs, f).covariance(), binv * ab * binv) < 1e-10);
  MatrixXd vs = .5 * (v + v.transpose());
  CHECK(oracle::rel_diff(prob::var_model_based2(rs, f).covariance(), binv * vs * binv) < 1e-10);
  auto r = prob::var_robust(rs, f);
  CHECK(r.n == n);
  CHECK(oracle::rel_diff(r.se(), r.covariance().diagonal().cwiseSqrt()) < 1e-14);
}

TEST_CASE("without ties the second model-based meat equals B") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    RiskSets rs(oracle::random_untied(rng, 60, 3));
    auto f = prob::fit(rs);
    CHECK(oracle::max_abs(prob::meat_model_based2(rs, f) - f.hessian) < 1e-12);
    CHECK(oracle::max_abs(prob::var_model_based2(rs, f).matrix - prob::var_naive(rs, f).matrix) < 1e-9);
  }
}

TEST_CASE("B dominates the first model-based meat") {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    auto s = oracle::random_set(rng, 4 + rep % 8, 3, .5);
    VectorXd g = VectorXd::Random(3) * .5;
    MatrixXd diff = prob::hessian_term(s.x, s.d, g) - prob::ab_term(s.x, s.d, g);
    CHECK(min_eigenvalue(diff) > -1e-12);
  }
}

TEST_CASE("enumeration: score unbiased, v-hat unbiased for the score variance") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 8; ++rep) {
    const int m = 3 + rep % 6, d = 1 + rep % 3;
    auto s = oracle::random_set(rng, m, d);
    VectorXd g = VectorXd::Random(d) * .3;
    VectorXd w = oracle::ew(s.x, g);
    const double p0 = .6 / w.maxCoeff();
    VectorXd p = p0 * w;
    auto score = oracle::enumerate(p, [&](const VectorXd& dd) { return oracle::bp_score({s.x, dd}, g); });
    auto vhat = oracle::enumerate(p, [&](const VectorXd& dd) { return oracle::flat(oracle::bp_v({s.x, dd}, g)); });
    CHECK(score.mean.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(oracle::max_abs(oracle::unflat(vhat.mean, d) - score.cov()) < 1e-12);

    auto lib = sim::enumerate_prob(s.x, p0, g);
    CHECK(oracle::max_abs(lib.mean_score - score.mean) < 1e-12);
    CHECK(oracle::max_abs(lib.var_score - score.cov()) < 1e-12);
    CHECK(oracle::max_abs(lib.mean_v - oracle::unflat(vhat.mean, d)) < 1e-12);
  }
}

TEST_CASE("monotone likelihood is reported") {
  // the failing subject always has the largest covariate in its risk set
  std::vector<int> y{1, 2, 3, 4, 4}, delta{1, 1, 1, 1, 0};
  std::vector<double> x{5, 4, 3, 2, 1};
  CHECK_THROWS_WITH_AS(prob::fit(tiny(y, delta, x, 4)), doctest::Contains("monotone"), ConvergenceError);
  // same design with one event moved off the extreme is finite
  x[1] = 0;
  CHECK_NOTHROW(prob::fit(tiny(y, delta, x, 4)));
}

TEST_CASE("collinear covariates are singular") {
  std::mt19937_64 rng(8);
  auto data = oracle::random_data(rng, 50, 1, 4);
  std::vector<SubjectRecord> s = data.subjects();
  for (auto& r : s) {
    Eigen::RowVectorXd x(2);
    x << r.x.at(1)(0), r.x.at(1)(0);
    r.x = CovariatePath(x);
  }
  DiscreteSurvivalData dup(data.grid(), s, {"a", "b"});
  CHECK_THROWS_AS(prob::fit(dup), SingularMatrixError);
  CHECK_THROWS_AS(prob::fit(DiscreteSurvivalData(data.grid(), {}, {"x"})), InputError);
}

TEST_CASE("fitted hazards above one raise a warning") {
  // closed form: e^g = (1 + sqrt 13) / 2, p(x = 2) about 1.23
  auto f = prob::fit(tiny({1, 1, 1}, {1, 1, 0}, {2, 1, 0}, 1));
  CHECK(std::exp(f.gamma(0)) == doctest::Approx((1 + std::sqrt(13.0)) / 2).epsilon(1e-10));
  REQUIRE(f.warnings.size() == 1);
  CHECK(f.warnings[0].find("exceed 1") != std::string::npos);
  auto ok = prob::fit(tiny({1, 2, 2, 3}, {1, 1, 0, 0}, {0, 1, .5, -1}, 3));
  CHECK(ok.warnings.empty());
}
