#include "dsurv/sim.hpp"

#include "dsurv/linalg.hpp"
#include "dsurv/odds.hpp"
#include "dsurv/plogit.hpp"
#include "dsurv/prob.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

namespace dsurv::sim {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

const char* law_name(EventLaw l) {
  switch (l) {
    case EventLaw::Exponential: return "exponential";
    case EventLaw::Weibull: return "weibull";
    case EventLaw::DiscreteProb: return "discrete_prob";
    case EventLaw::DiscreteOdds: return "discrete_odds";
  }
  return "";
}

const char* censor_name(CensorLaw l) { return l == CensorLaw::Uniform ? "uniform" : "beta_test"; }

void run_parallel(int reps, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, reps));
  if (threads == 1) {
    for (int r = 0; r < reps; ++r) body(r);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (int r = t; r < reps; r += threads) body(r);
    });
  for (auto& th : pool) th.join();
}

struct Moments {
  double mean = kNaN, sd = kNaN;
};

// values in replicate order; NaN entries are failures and skipped
Moments moments(const std::vector<double>& v) {
  CompensatedSum s;
  int m = 0;
  for (double x : v)
    if (!std::isnan(x)) {
      s.add(x);
      ++m;
    }
  Moments out;
  if (m == 0) return out;
  out.mean = s.value() / m;
  if (m < 2) return out;
  CompensatedSum q;
  for (double x : v)
    if (!std::isnan(x)) q.add((x - out.mean) * (x - out.mean));
  out.sd = std::sqrt(q.value() / (m - 1));
  return out;
}

const MatrixXd& covariate_factor() {
  static const MatrixXd l = [] {
    MatrixXd c(4, 4);
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) c(j, k) = std::pow(2.0, -std::abs(j - k));
    return MatrixXd(c.llt().matrixL());
  }();
  return l;
}

double censor_draw(const SimScenario& s, std::mt19937_64& rng, bool test, double scale) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (s.censor_law == CensorLaw::BetaTest && test) {
    std::gamma_distribution<double> g(2.0, 1.0);
    double a = g(rng), b = g(rng);
    return 4 * scale * a / (a + b);
  }
  return 4 * scale * unif(rng);
}

}  // namespace

void SimScenario::validate() const {
  if (n < 1) throw InputError("scenario: n must be positive");
  if (reps < 1) throw InputError("scenario: reps must be at least 1");
  if (!(bin_width > 0) || !std::isfinite(bin_width)) throw InputError("scenario: bin_width must be positive");
  if (beta_star.size() != 5) throw InputError("scenario: beta_star needs 5 entries (Tr, X1..X4)");
  if (!beta_star.allFinite()) throw InputError("scenario: beta_star is not finite");
  if (!(t_max >= 0)) throw InputError("scenario: t_max must be non-negative");
  if (event_law == EventLaw::Weibull && !(shape_test > 0 && shape_standard > 0))
    throw InputError("scenario: Weibull shapes must be positive");
  if (event_law == EventLaw::DiscreteProb || event_law == EventLaw::DiscreteOdds) {
    if (t_max <= 0) throw InputError("scenario: discrete event laws need t_max");
    int J = TimeGrid::equal_width(bin_width, t_max).J();
    if (static_cast<int>(baseline_hazard.size()) != J)
      throw InputError("scenario: baseline_hazard needs " + std::to_string(J) + " entries");
    for (double h : baseline_hazard)
      if (!(h > 0 && h < 1)) throw InputError("scenario: baseline hazards must lie in (0, 1)");
  }
}

std::string to_json(const SimScenario& s) {
  json j;
  j["name"] = s.name;
  j["n"] = s.n;
  j["beta_star"] = std::vector<double>(s.beta_star.data(), s.beta_star.data() + s.beta_star.size());
  j["event_law"] = law_name(s.event_law);
  j["shape_test"] = s.shape_test;
  j["shape_standard"] = s.shape_standard;
  j["censor_law"] = censor_name(s.censor_law);
  j["treatment_coding"] = s.treatment_coding == TreatmentCoding::OneTwo ? "1/2" : "0/1";
  j["bin_width"] = s.bin_width;
  j["t_max"] = s.t_max;
  j["baseline_hazard"] = s.baseline_hazard;
  j["censor"] = s.censor_option == CensorOption::CensoredLate ? "late" : "early";
  j["reps"] = s.reps;
  j["seed"] = s.seed;
  return j.dump(2);
}

SimScenario scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("scenario JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("scenario JSON must be an object");
  static const std::set<std::string> known = {"name",      "n",         "beta_star", "event_law",       "shape_test",
                                              "shape_standard", "censor_law", "treatment_coding", "bin_width",
                                              "t_max",     "baseline_hazard", "censor", "reps", "seed"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw InputError("scenario JSON: unknown field '" + it.key() + "'");
  SimScenario s;
  try {
    if (j.contains("name")) s.name = j["name"].get<std::string>();
    if (j.contains("n")) s.n = j["n"].get<int>();
    if (j.contains("beta_star")) {
      auto b = j["beta_star"].get<std::vector<double>>();
      s.beta_star = Eigen::Map<VectorXd>(b.data(), static_cast<long>(b.size()));
    }
    if (j.contains("event_law")) {
      auto v = j["event_law"].get<std::string>();
      bool ok = false;
      for (auto l : {EventLaw::Exponential, EventLaw::Weibull, EventLaw::DiscreteProb, EventLaw::DiscreteOdds})
        if (v == law_name(l)) {
          s.event_law = l;
          ok = true;
        }
      if (!ok) throw InputError("scenario JSON: unknown event_law '" + v + "'");
    }
    if (j.contains("shape_test")) s.shape_test = j["shape_test"].get<double>();
    if (j.contains("shape_standard")) s.shape_standard = j["shape_standard"].get<double>();
    if (j.contains("censor_law")) {
      auto v = j["censor_law"].get<std::string>();
      if (v == "uniform")
        s.censor_law = CensorLaw::Uniform;
      else if (v == "beta_test")
        s.censor_law = CensorLaw::BetaTest;
      else
        throw InputError("scenario JSON: unknown censor_law '" + v + "'");
    }
    if (j.contains("treatment_coding")) {
      auto v = j["treatment_coding"].get<std::string>();
      if (v == "1/2")
        s.treatment_coding = TreatmentCoding::OneTwo;
      else if (v == "0/1")
        s.treatment_coding = TreatmentCoding::ZeroOne;
      else
        throw InputError("scenario JSON: treatment_coding must be '1/2' or '0/1'");
    }
    if (j.contains("bin_width")) s.bin_width = j["bin_width"].get<double>();
    if (j.contains("t_max")) s.t_max = j["t_max"].get<double>();
    if (j.contains("baseline_hazard")) s.baseline_hazard = j["baseline_hazard"].get<std::vector<double>>();
    if (j.contains("censor")) {
      auto v = j["censor"].get<std::string>();
      if (v == "late")
        s.censor_option = CensorOption::CensoredLate;
      else if (v == "early")
        s.censor_option = CensorOption::CensoredEarly;
      else
        throw InputError("scenario JSON: censor must be 'early' or 'late'");
    }
    if (j.contains("reps")) s.reps = j["reps"].get<int>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw InputError(std::string("scenario JSON: ") + e.what());
  }
  s.validate();
  return s;
}

std::mt19937_64 replicate_engine(std::uint64_t seed, std::uint64_t rep) {
  std::uint64_t state = seed;
  std::uint64_t a = splitmix64(state);
  state = a ^ (rep * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL);
  std::uint32_t words[8];
  for (int k = 0; k < 4; ++k) {
    std::uint64_t z = splitmix64(state);
    words[2 * k] = static_cast<std::uint32_t>(z);
    words[2 * k + 1] = static_cast<std::uint32_t>(z >> 32);
  }
  std::seed_seq seq(words, words + 8);
  return std::mt19937_64(seq);
}

RowVectorXd draw_covariates(std::mt19937_64& rng) {
  std::bernoulli_distribution coin(.5);
  std::normal_distribution<double> norm(0.0, 1.0);
  RowVectorXd x(5);
  x(0) = coin(rng) ? 1.0 : 2.0;
  VectorXd z(4);
  for (int k = 0; k < 4; ++k) z(k) = norm(rng);
  x.tail(4) = (covariate_factor() * z).transpose();
  return x;
}

namespace {

// true for the test arm; shifts Tr to 0/1 when asked
bool recode(const SimScenario& s, RowVectorXd& x) {
  const bool test = x(0) == 1;
  if (s.treatment_coding == TreatmentCoding::ZeroOne) x(0) -= 1;
  return test;
}

}  // namespace

DiscreteSurvivalData generate(const SimScenario& s, std::uint64_t rep) {
  s.validate();
  auto rng = replicate_engine(s.seed, rep);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const bool discrete = s.event_law == EventLaw::DiscreteProb || s.event_law == EventLaw::DiscreteOdds;

  if (discrete) {
    TimeGrid grid = TimeGrid::equal_width(s.bin_width, s.t_max);
    const auto& t = grid.breakpoints();
    const int J = grid.J();
    std::vector<SubjectRecord> subjects;
    subjects.reserve(s.n);
    for (int i = 0; i < s.n; ++i) {
      RowVectorXd x = draw_covariates(rng);
      const bool test = recode(s, x);
      const double eta = x.dot(s.beta_star.transpose());
      const double c = censor_draw(s, rng, test, std::exp(-eta));
      // interval holding the censoring time; censor-late keeps the subject at risk there
      int cj = static_cast<int>(std::upper_bound(t.begin(), t.end(), c) - t.begin()) + 1;
      int last = std::min(s.censor_option == CensorOption::CensoredLate ? cj : cj - 1, J);
      SubjectRecord r;
      r.id = std::to_string(i + 1);
      r.x = CovariatePath(x);
      r.y_index = last;
      for (int j = 1; j <= last; ++j) {
        const double h = s.baseline_hazard[j - 1];
        double p;
        if (s.event_law == EventLaw::DiscreteProb)
          p = std::min(1.0, h * std::exp(eta));
        else
          p = 1 / (1 + std::exp(-(std::log(h / (1 - h)) + eta)));
        if (unif(rng) < p) {
          r.y_index = j;
          r.delta = true;
          break;
        }
      }
      subjects.push_back(std::move(r));
    }
    return DiscreteSurvivalData(grid, std::move(subjects), SimScenario::covariate_names());
  }

  std::vector<RawRecord> raw;
  raw.reserve(s.n);
  double ymax = 0;
  for (int i = 0; i < s.n; ++i) {
    RowVectorXd x = draw_covariates(rng);
    const bool test = recode(s, x);
    const double eta = x.dot(s.beta_star.transpose());
    const double scale = std::exp(-eta);
    double tt;
    if (s.event_law == EventLaw::Exponential) {
      tt = std::exponential_distribution<double>(1 / scale)(rng);
    } else {
      const double shape = test ? s.shape_test : s.shape_standard;
      tt = std::weibull_distribution<double>(shape, scale)(rng);
    }
    const double c = censor_draw(s, rng, test, scale);
    RawRecord r;
    r.id = std::to_string(i + 1);
    r.time = std::min(tt, c);
    r.status = tt <= c;
    r.x = x;
    ymax = std::max(ymax, r.time);
    raw.push_back(std::move(r));
  }
  TimeGrid grid = TimeGrid::equal_width(s.bin_width, s.t_max > 0 ? s.t_max : ymax);
  const double tJ = grid.t(grid.J());
  for (auto& r : raw)
    if (r.time > tJ) {
      r.time = tJ;
      r.status = false;
    }
  return discretize(raw, grid, s.censor_option, SimScenario::covariate_names());
}

const SeColumn& MethodSummary::column(const std::string& label) const {
  for (const auto& c : se)
    if (c.label == label) return c;
  throw InputError("no SE column '" + label + "' for " + method);
}

const MethodSummary& SimSummary::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.method == name) return m;
  throw InputError("method " + name + " not in summary");
}

namespace {

struct RepFit {
  bool ok = false;
  VectorXd est;
  std::vector<VectorXd> var;  // diagonal of the estimator covariance, one per label
};

const char* method_name(Method m) {
  switch (m) {
    case Method::BP: return "BP";
    case Method::WMH: return "wMH";
    case Method::Plogit: return "Plogit";
  }
  return "";
}

std::vector<std::string> method_labels(Method m) {
  switch (m) {
    case Method::BP: return {"naive", "mb", "mb2", "robust"};
    case Method::WMH: return {"mb", "mb2", "mb3", "robust"};
    case Method::Plogit: return {"mb", "robust"};
  }
  return {};
}

VectorXd diag(const VarianceEstimate& v) { return v.covariance().diagonal(); }

RepFit fit_one(const RiskSets& rs, Method m) {
  RepFit out;
  try {
    switch (m) {
      case Method::BP: {
        auto f = prob::fit(rs);
        out.est = f.gamma;
        out.var = {diag(prob::var_naive(rs, f)), diag(prob::var_model_based(rs, f)),
                   diag(prob::var_model_based2(rs, f)), diag(prob::var_robust(rs, f))};
        break;
      }
      case Method::WMH: {
        auto f = odds::fit(rs);
        out.est = f.beta;
        out.var = {diag(odds::var_model_based(rs, f)), diag(odds::var_model_based2(rs, f)),
                   diag(odds::var_model_based3(rs, f)), diag(odds::var_robust(rs, f))};
        break;
      }
      case Method::Plogit: {
        auto f = plogit::fit(rs);
        auto v = plogit::variances(rs, f);
        out.est = f.beta;
        out.var = {diag(v.model_based), diag(v.robust)};
        break;
      }
    }
    out.ok = out.est.allFinite();
    for (const auto& v : out.var) out.ok = out.ok && v.allFinite();
  } catch (const std::exception&) {
    out.ok = false;
  }
  return out;
}

}  // namespace

SimSummary replicate(const SimScenario& s, const std::vector<Method>& methods, int threads) {
  s.validate();
  const int R = s.reps;
  const int M = static_cast<int>(methods.size());
  std::vector<std::vector<RepFit>> fits(R, std::vector<RepFit>(M));
  run_parallel(R, threads, [&](int r) {
    RiskSets rs(generate(s, static_cast<std::uint64_t>(r)));
    for (int m = 0; m < M; ++m) fits[r][m] = fit_one(rs, methods[m]);
  });

  SimSummary out;
  out.scenario = s.name;
  out.reps = R;
  out.coefficients = SimScenario::covariate_names();
  const int d = static_cast<int>(out.coefficients.size());
  for (int m = 0; m < M; ++m) {
    MethodSummary ms;
    ms.method = method_name(methods[m]);
    auto labels = method_labels(methods[m]);
    ms.mean = VectorXd::Constant(d, kNaN);
    ms.sd = VectorXd::Constant(d, kNaN);
    for (const auto& l : labels) ms.se.push_back({l, VectorXd::Constant(d, kNaN)});
    for (int r = 0; r < R; ++r) (fits[r][m].ok ? ms.successes : ms.failures)++;
    for (int k = 0; k < d; ++k) {
      std::vector<double> v(R);
      for (int r = 0; r < R; ++r) v[r] = fits[r][m].ok ? fits[r][m].est(k) : kNaN;
      auto mo = moments(v);
      ms.mean(k) = mo.mean;
      ms.sd(k) = mo.sd;
      for (std::size_t l = 0; l < labels.size(); ++l) {
        for (int r = 0; r < R; ++r) v[r] = fits[r][m].ok ? fits[r][m].var[l](k) : kNaN;
        ms.se[l].mean_se(k) = std::sqrt(moments(v).mean);
      }
    }
    out.methods.push_back(std::move(ms));
  }
  return out;
}

std::string summary_csv(const SimSummary& summary) {
  static const std::vector<std::string> cols = {"naive", "mb", "mb2", "mb3", "robust"};
  std::ostringstream os;
  os << "method,coefficient,mean,sd";
  for (const auto& c : cols) os << ",se_" << c;
  os << ",successes,failures\n";
  auto num = [](double v) {
    if (std::isnan(v)) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& m : summary.methods)
    for (std::size_t k = 0; k < summary.coefficients.size(); ++k) {
      os << m.method << ',' << summary.coefficients[k] << ',' << num(m.mean(k)) << ',' << num(m.sd(k));
      for (const auto& c : cols) {
        os << ',';
        for (const auto& col : m.se)
          if (col.label == c) os << num(col.mean_se(k));
      }
      os << ',' << m.successes << ',' << m.failures << '\n';
    }
  return os.str();
}

CurveCalibration curve_calibration(const SimScenario& s, CurveModel model, const VectorXd& x0, int k, int threads) {
  s.validate();
  if (x0.size() != 5) throw InputError("x0 needs 5 entries");
  if (k < 1 || (s.t_max > 0 && k > TimeGrid::equal_width(s.bin_width, s.t_max).J()))
    throw InputError("curve index outside the grid");
  const int R = s.reps;
  std::vector<double> logs(R, kNaN), vr(R, kNaN), vm(R, kNaN);
  run_parallel(R, threads, [&](int r) {
    try {
      auto data = generate(s, static_cast<std::uint64_t>(r));
      RiskSets rs(data);
      SurvivalCurve c;
      if (model == CurveModel::Prob) {
        auto f = prob::fit(rs);
        c = prob_curve(rs, f, x0, prob::var_model_based2(rs, f));
      } else {
        auto f = odds::fit(rs);
        c = odds_curve(rs, f, x0, odds::var_model_based2(rs, f));
      }
      const double sv = c.survival(k - 1);
      const double a = c.se_log_surv_robust(k - 1), b = c.se_log_surv_model_based(k - 1);
      if (sv > 0 && std::isfinite(a) && std::isfinite(b)) {
        logs[r] = std::log(sv);
        vr[r] = a * a;
        vm[r] = b * b;
      }
    } catch (const std::exception&) {
    }
  });
  CurveCalibration out;
  out.k = k;
  for (double v : logs) (std::isnan(v) ? out.failures : out.successes)++;
  auto mo = moments(logs);
  out.log_surv_mean = mo.mean;
  out.log_surv_sd = mo.sd;
  out.se_robust = std::sqrt(moments(vr).mean);
  out.se_model_based = std::sqrt(moments(vm).mean);
  return out;
}

namespace {

// calls f(d, weight) for every configuration, weights normalized
template <class F>
void for_each_config(const VectorXd& p, std::optional<int> given_t, F&& f) {
  const int m = static_cast<int>(p.size());
  if (m > kMaxEnumeration) throw InputError("risk set too large to enumerate");
  if (given_t && (*given_t < 0 || *given_t > m)) throw InputError("event count outside the risk set");
  const std::uint64_t total = std::uint64_t{1} << m;
  double norm = 0;
  std::vector<std::pair<std::uint64_t, double>> configs;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    if (given_t && std::popcount(mask) != *given_t) continue;
    double w = 1;
    for (int i = 0; i < m; ++i) w *= (mask >> i & 1) ? p(i) : 1 - p(i);
    if (w == 0) continue;
    configs.emplace_back(mask, w);
    norm += w;
  }
  if (!(norm > 0)) throw InputError("conditioning event has probability zero");
  VectorXd d(m);
  for (const auto& [mask, w] : configs) {
    for (int i = 0; i < m; ++i) d(i) = (mask >> i & 1) ? 1.0 : 0.0;
    f(d, w / norm);
  }
}

}  // namespace

ProbMoments enumerate_prob(const MatrixXd& x, double p0, const VectorXd& gamma, std::optional<int> given_t) {
  VectorXd p = p0 * (x * gamma).array().exp().matrix();
  for (int i = 0; i < p.size(); ++i)
    if (!(p(i) >= 0 && p(i) <= 1)) throw InputError("hazard probability outside [0, 1]");
  const int dd = static_cast<int>(x.cols());
  ProbMoments out;
  out.mean_score = VectorXd::Zero(dd);
  out.var_score = MatrixXd::Zero(dd, dd);
  out.mean_v = MatrixXd::Zero(dd, dd);
  for_each_config(p, given_t, [&](const VectorXd& d, double w) {
    out.mean_score += w * prob::score_term(x, d, gamma);
    out.mean_v += w * prob::v_term(x, d, gamma);
  });
  for_each_config(p, given_t, [&](const VectorXd& d, double w) {
    VectorXd c = prob::score_term(x, d, gamma) - out.mean_score;
    out.var_score += w * c * c.transpose();
  });
  return out;
}

OddsMoments enumerate_odds(const MatrixXd& x, double alpha, const VectorXd& beta, std::optional<int> given_t) {
  VectorXd p = (1 / (1 + (-(alpha + (x * beta).array())).exp())).matrix();
  const int dd = static_cast<int>(x.cols());
  OddsMoments out;
  out.mean_score = VectorXd::Zero(dd);
  out.var_score = MatrixXd::Zero(dd, dd);
  out.mean_sigma_hat = MatrixXd::Zero(dd, dd);
  out.mean_sigma_tilde = MatrixXd::Zero(dd, dd);
  out.mean_sigma_tilde_sym = MatrixXd::Zero(dd, dd);
  for_each_config(p, given_t, [&](const VectorXd& d, double w) {
    out.mean_score += w * odds::score_term(x, d, beta);
    out.mean_sigma_hat += w * odds::sigma_hat_term(x, d, beta);
    out.mean_sigma_tilde += w * odds::sigma_tilde_term(x, d, beta);
    out.mean_sigma_tilde_sym += w * odds::sigma_tilde_sym_term(x, d, beta);
  });
  for_each_config(p, given_t, [&](const VectorXd& d, double w) {
    VectorXd c = odds::score_term(x, d, beta) - out.mean_score;
    out.var_score += w * c * c.transpose();
  });
  return out;
}

}  // namespace dsurv::sim
