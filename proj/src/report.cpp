#include "dsurv/report.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace dsurv {

using Eigen::VectorXd;
using nlohmann::ordered_json;

std::string to_string(VarianceKind k) {
  switch (k) {
    case VarianceKind::Naive: return "naive";
    case VarianceKind::Robust: return "robust";
    case VarianceKind::ModelBased: return "mb";
    case VarianceKind::ModelBased2: return "mb2";
    case VarianceKind::ModelBased3: return "mb3";
  }
  return "";
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

FitReport skeleton(const RiskSets& rs, const std::vector<std::string>& names, const VectorXd& est,
                   const VectorXd& base, const std::string& model, const std::string& scale) {
  if (static_cast<int>(names.size()) != est.size()) throw InputError("coefficient names do not match the fit");
  FitReport r;
  r.model = model;
  r.n = rs.n;
  r.J = rs.J;
  r.baseline_scale = scale;
  for (int k = 0; k < est.size(); ++k) {
    CoefRow c;
    c.name = names[k];
    c.estimate = est(k);
    c.se_naive = c.se_model_based = c.se_model_based2 = c.se_model_based3 = kNaN;
    r.coefficients.push_back(c);
  }
  for (int j = 1; j <= rs.J; ++j) {
    BaselineRow b;
    b.j = j;
    b.t = rs.times[j - 1];
    b.at_risk = rs.summary.n[j - 1];
    b.events = rs.summary.T[j - 1];
    b.value = std::isfinite(base(j - 1)) ? base(j - 1) : kNaN;
    r.baseline.push_back(b);
  }
  return r;
}

void fill(FitReport& r, double CoefRow::*col, const VarianceEstimate& v) {
  VectorXd se = v.se();
  for (int k = 0; k < se.size(); ++k) r.coefficients[k].*col = se(k);
}

void finish(FitReport& r) {
  for (auto& c : r.coefficients) {
    c.z = c.estimate / c.se_robust;
    c.p = std::erfc(std::abs(c.z) / std::sqrt(2.0));
  }
}

double num(const ordered_json& j) { return j.is_null() ? kNaN : j.get<double>(); }

ordered_json val(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string fmt3(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string fmt17(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

FitReport make_report(const RiskSets& rs, const std::vector<std::string>& names, const prob::ProbFit& fit,
                      const VarianceRequest& req) {
  FitReport r = skeleton(rs, names, fit.gamma, fit.gamma0, "prob", "log_hazard");
  fill(r, &CoefRow::se_robust, prob::var_robust(rs, fit));
  if (req.naive) fill(r, &CoefRow::se_naive, prob::var_naive(rs, fit));
  if (req.mb) fill(r, &CoefRow::se_model_based, prob::var_model_based(rs, fit));
  if (req.mb2) fill(r, &CoefRow::se_model_based2, prob::var_model_based2(rs, fit));
  if (req.mb3) r.warnings.push_back("mb3 is defined for the odds model only");
  r.convergence = {true, fit.iterations, fit.score_norm, "zero", false};
  r.warnings.insert(r.warnings.begin(), fit.warnings.begin(), fit.warnings.end());
  finish(r);
  return r;
}

FitReport make_report(const RiskSets& rs, const std::vector<std::string>& names, const odds::OddsFit& fit,
                      const VarianceRequest& req) {
  FitReport r = skeleton(rs, names, fit.beta, fit.beta0, "odds", "log_odds");
  fill(r, &CoefRow::se_robust, odds::var_robust(rs, fit));
  if (req.naive) r.warnings.push_back("naive variance is defined for the probability model only");
  if (req.mb) fill(r, &CoefRow::se_model_based, odds::var_model_based(rs, fit));
  if (req.mb2) fill(r, &CoefRow::se_model_based2, odds::var_model_based2(rs, fit));
  if (req.mb3) fill(r, &CoefRow::se_model_based3, odds::var_model_based3(rs, fit));
  r.convergence = {true, fit.iterations, fit.score_norm, fit.init, fit.fd_fallback};
  r.warnings.insert(r.warnings.begin(), fit.warnings.begin(), fit.warnings.end());
  finish(r);
  return r;
}

FitReport make_report(const RiskSets& rs, const std::vector<std::string>& names, const plogit::PlogitFit& fit,
                      const VarianceRequest& req) {
  FitReport r = skeleton(rs, names, fit.beta, fit.beta0, "plogit", "intercept");
  auto v = plogit::variances(rs, fit);
  fill(r, &CoefRow::se_robust, v.robust);
  if (req.mb || req.mb2) fill(r, &CoefRow::se_model_based, v.model_based);
  if (req.naive || req.mb3) r.warnings.push_back("plogit reports a single model-based variance");
  r.convergence = {true, fit.iterations, fit.score_norm, "zero", false};
  r.warnings.insert(r.warnings.begin(), fit.warnings.begin(), fit.warnings.end());
  finish(r);
  return r;
}

std::string to_json(const FitReport& r) {
  ordered_json j;
  j["model"] = r.model;
  j["n"] = r.n;
  j["J"] = r.J;
  ordered_json coefs = ordered_json::array();
  for (const auto& c : r.coefficients) {
    ordered_json o;
    o["name"] = c.name;
    o["estimate"] = val(c.estimate);
    o["se_naive"] = val(c.se_naive);
    o["se_model_based"] = val(c.se_model_based);
    o["se_model_based2"] = val(c.se_model_based2);
    o["se_model_based3"] = val(c.se_model_based3);
    o["se_robust"] = val(c.se_robust);
    o["z"] = val(c.z);
    o["p"] = val(c.p);
    coefs.push_back(o);
  }
  j["coefficients"] = coefs;
  j["baseline_scale"] = r.baseline_scale;
  ordered_json base = ordered_json::array();
  for (const auto& b : r.baseline) {
    ordered_json o;
    o["j"] = b.j;
    o["t"] = val(b.t);
    o["at_risk"] = b.at_risk;
    o["events"] = b.events;
    o["value"] = val(b.value);
    base.push_back(o);
  }
  j["baseline"] = base;
  ordered_json conv;
  conv["converged"] = r.convergence.converged;
  conv["iterations"] = r.convergence.iterations;
  conv["score_norm"] = val(r.convergence.score_norm);
  conv["init"] = r.convergence.init;
  conv["fd_fallback"] = r.convergence.fd_fallback;
  j["convergence"] = conv;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

FitReport report_from_json(const std::string& text) {
  FitReport r;
  try {
    auto j = ordered_json::parse(text);
    r.model = j.at("model").get<std::string>();
    r.n = j.at("n").get<int>();
    r.J = j.at("J").get<int>();
    for (const auto& o : j.at("coefficients")) {
      CoefRow c;
      c.name = o.at("name").get<std::string>();
      c.estimate = num(o.at("estimate"));
      c.se_naive = num(o.at("se_naive"));
      c.se_model_based = num(o.at("se_model_based"));
      c.se_model_based2 = num(o.at("se_model_based2"));
      c.se_model_based3 = num(o.at("se_model_based3"));
      c.se_robust = num(o.at("se_robust"));
      c.z = num(o.at("z"));
      c.p = num(o.at("p"));
      r.coefficients.push_back(c);
    }
    r.baseline_scale = j.at("baseline_scale").get<std::string>();
    for (const auto& o : j.at("baseline")) {
      BaselineRow b;
      b.j = o.at("j").get<int>();
      b.t = num(o.at("t"));
      b.at_risk = o.at("at_risk").get<int>();
      b.events = o.at("events").get<int>();
      b.value = num(o.at("value"));
      r.baseline.push_back(b);
    }
    const auto& c = j.at("convergence");
    r.convergence.converged = c.at("converged").get<bool>();
    r.convergence.iterations = c.at("iterations").get<int>();
    r.convergence.score_norm = num(c.at("score_norm"));
    r.convergence.init = c.at("init").get<std::string>();
    r.convergence.fd_fallback = c.at("fd_fallback").get<bool>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("fit report JSON: ") + e.what());
  }
  return r;
}

std::string to_table(const FitReport& r) {
  std::ostringstream os;
  os << "model: " << r.model << "  n = " << r.n << "  intervals = " << r.J << "\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %9s %9s %9s %9s %9s %9s %9s %9s\n", "term", "estimate", "se_naive", "se_mb",
                "se_mb2", "se_mb3", "se_robust", "z", "p");
  os << line;
  for (const auto& c : r.coefficients) {
    std::snprintf(line, sizeof line, "%-12s %9s %9s %9s %9s %9s %9s %9s %9s\n", c.name.c_str(), fmt3(c.estimate).c_str(),
                  fmt3(c.se_naive).c_str(), fmt3(c.se_model_based).c_str(), fmt3(c.se_model_based2).c_str(),
                  fmt3(c.se_model_based3).c_str(), fmt3(c.se_robust).c_str(), fmt3(c.z).c_str(), fmt3(c.p).c_str());
    os << line;
  }
  os << "iterations: " << r.convergence.iterations << "  |score|: " << r.convergence.score_norm << "\n";
  return os.str();
}

std::string coefficients_csv(const FitReport& r) {
  std::ostringstream os;
  os << "term,estimate,se_naive,se_model_based,se_model_based2,se_model_based3,se_robust,z,p\n";
  for (const auto& c : r.coefficients)
    os << c.name << ',' << fmt17(c.estimate) << ',' << fmt17(c.se_naive) << ',' << fmt17(c.se_model_based) << ','
       << fmt17(c.se_model_based2) << ',' << fmt17(c.se_model_based3) << ',' << fmt17(c.se_robust) << ','
       << fmt17(c.z) << ',' << fmt17(c.p) << '\n';
  return os.str();
}

void write_curve_csv(std::ostream& out, const SurvivalCurve& c) {
  out << "k,t,hazard,survival,cumhaz,se_log_surv_robust,se_log_surv_model_based,se_surv_robust,se_surv_model_based,"
         "flag\n";
  for (int k = 0; k < c.J(); ++k)
    out << k + 1 << ',' << fmt17(c.t[k]) << ',' << fmt17(c.hazard(k)) << ',' << fmt17(c.survival(k)) << ','
        << fmt17(c.cumhaz(k)) << ',' << fmt17(c.se_log_surv_robust(k)) << ',' << fmt17(c.se_log_surv_model_based(k))
        << ',' << fmt17(c.se_surv_robust(k)) << ',' << fmt17(c.se_surv_model_based(k)) << ',' << c.flags[k] << '\n';
}

}  // namespace dsurv
