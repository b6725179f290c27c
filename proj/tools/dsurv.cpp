#include "dsurv/csv.hpp"
#include "dsurv/curve.hpp"
#include "dsurv/report.hpp"
#include "dsurv/sim.hpp"
#include "dsurv/twosample.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace dsurv;

namespace {

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> numbers(const std::string& s, const std::string& what) {
  std::vector<double> v;
  for (const auto& t : split(s)) v.push_back(parse_double(t, what));
  return v;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

struct GridArgs {
  std::string grid;
  double width = 0;
  std::string censor = "auto";
};

void add_grid_options(CLI::App* cmd, GridArgs& g) {
  auto* grid = cmd->add_option("--grid", g.grid, "comma-separated breakpoints t_1 < ... < t_J");
  auto* width = cmd->add_option("--width", g.width, "equal-width bins");
  grid->excludes(width);
  cmd->add_option("--censor", g.censor, "censoring convention")->check(CLI::IsMember({"auto", "early", "late"}));
}

// unique observed times and censored-early by default; explicit bins default to censored-late
DiscreteSurvivalData load_raw(const CsvTable& csv, const std::vector<std::string>& keep, const GridArgs& g) {
  auto subjects = read_subjects(csv, keep);
  TimeGrid grid;
  CensorOption option;
  if (!g.grid.empty()) {
    grid = TimeGrid(numbers(g.grid, "grid"));
    option = CensorOption::CensoredLate;
  } else if (g.width > 0) {
    double tmax = 0;
    for (const auto& r : subjects.records) tmax = std::max(tmax, r.time);
    grid = TimeGrid::equal_width(g.width, tmax);
    option = CensorOption::CensoredLate;
  } else {
    std::vector<double> t;
    for (const auto& r : subjects.records) t.push_back(r.time);
    grid = TimeGrid::from_times(t);
    option = CensorOption::CensoredEarly;
  }
  if (g.censor == "early") option = CensorOption::CensoredEarly;
  if (g.censor == "late") option = CensorOption::CensoredLate;
  return discretize(subjects.records, grid, option, subjects.names);
}

DiscreteSurvivalData apply_tdc(DiscreteSurvivalData data, const std::vector<std::string>& terms) {
  for (const auto& term : terms) {
    auto colon = term.find(':');
    if (colon == std::string::npos) throw InputError("--tdc expects col:thr1,thr2,...");
    std::string col = term.substr(0, colon);
    int idx = -1;
    for (int k = 0; k < data.d(); ++k)
      if (data.names()[k] == col) idx = k;
    if (idx < 0) throw InputError("--tdc: unknown covariate '" + col + "'");
    auto warn = data.warnings;
    data = expand_step_terms(data, idx, numbers(term.substr(colon + 1), "threshold"));
    data.warnings = warn;
  }
  return data;
}

int cmd_fit(const std::string& model, const std::string& path, bool person_period, const std::string& covariates,
            const GridArgs& g, const std::vector<std::string>& tdc, const std::string& variance,
            const std::string& x0s, const std::string& curve_out, const std::string& json_out,
            const std::string& format, const SolverOptions& opt) {
  CsvTable csv = read_csv_file(path);
  auto keep = split(covariates);
  DiscreteSurvivalData data;
  if (person_period) {
    std::optional<TimeGrid> grid;
    if (!g.grid.empty()) grid = TimeGrid(numbers(g.grid, "grid"));
    data = read_person_period(csv, grid, keep);
  } else {
    data = load_raw(csv, keep, g);
  }
  data = apply_tdc(std::move(data), tdc);

  VarianceRequest req{false, false, false, false};
  for (const auto& v : split(variance)) {
    if (v == "robust") continue;
    if (v == "naive")
      req.naive = true;
    else if (v == "mb")
      req.mb = true;
    else if (v == "mb2")
      req.mb2 = true;
    else if (v == "mb3")
      req.mb3 = true;
    else
      throw InputError("unknown variance kind '" + v + "'");
  }

  RiskSets rs(data);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(data.d());
  if (!x0s.empty()) {
    auto v = numbers(x0s, "x0");
    if (static_cast<int>(v.size()) != data.d())
      throw InputError("--x0 needs " + std::to_string(data.d()) + " values");
    x0 = Eigen::Map<Eigen::VectorXd>(v.data(), data.d());
  }

  FitReport report;
  std::optional<SurvivalCurve> curve;
  if (model == "prob") {
    auto f = prob::fit(rs, opt);
    report = make_report(rs, data.names(), f, req);
    if (!curve_out.empty()) curve = prob_curve(rs, f, x0, prob::var_model_based2(rs, f));
  } else if (model == "odds") {
    auto f = odds::fit(rs, opt);
    report = make_report(rs, data.names(), f, req);
    if (!curve_out.empty()) curve = odds_curve(rs, f, x0, odds::var_model_based2(rs, f));
  } else {
    if (!curve_out.empty()) throw InputError("--curve is available for the prob and odds models");
    auto f = plogit::fit(rs, opt);
    report = make_report(rs, data.names(), f, req);
  }
  report.warnings.insert(report.warnings.begin(), data.warnings.begin(), data.warnings.end());
  if (curve) {
    std::ofstream out(curve_out);
    if (!out) throw InputError("cannot write " + curve_out);
    write_curve_csv(out, *curve);
    for (const auto& w : curve->warnings) report.warnings.push_back("curve: " + w);
  }
  if (!json_out.empty()) write_file(json_out, to_json(report));
  if (format == "json")
    std::cout << to_json(report);
  else if (format == "csv")
    std::cout << coefficients_csv(report);
  else
    std::cout << to_table(report);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

int cmd_tables(const std::string& path, const std::string& layout, const std::string& method,
               const std::string& format) {
  auto t = twosample::read_tables(read_csv_file(path), layout == "survival" ? twosample::Layout::Survival
                                                                          : twosample::Layout::Independent);
  nlohmann::ordered_json j;
  j["strata"] = t.strata.size();
  j["n"] = t.n();
  auto v = [](double x) { return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr); };
  if (method == "bp" || method == "both") {
    auto r = twosample::bp_two_sample(t);
    j["bp"] = {{"log_ratio", v(r.gamma)},
               {"se_naive", v(std::sqrt(r.var_naive))},
               {"se_model_based", v(std::sqrt(r.var_b))},
               {"se_model_based2", v(std::sqrt(r.var_b2))},
               {"se_robust", v(std::sqrt(r.var_robust))},
               {"skipped", r.skipped}};
  }
  if (method == "wmh" || method == "both") {
    auto r = twosample::wmh_two_sample(t);
    j["wmh"] = {{"log_odds_ratio", v(r.beta)},
                {"se_model_based2", v(std::sqrt(r.var_b2))},
                {"se_model_based3", v(std::sqrt(r.var_b3))},
                {"se_robust", v(std::sqrt(r.var_robust))},
                {"skipped", r.skipped}};
  }
  if (format == "json") {
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::printf("strata: %zu  n: %ld\n", t.strata.size(), t.n());
  for (const char* key : {"bp", "wmh"}) {
    if (!j.contains(key)) continue;
    std::printf("%s\n", key);
    for (auto it = j[key].begin(); it != j[key].end(); ++it) {
      if (it.value().is_null())
        std::printf("  %-16s NA\n", it.key().c_str());
      else if (it.value().is_number_integer())
        std::printf("  %-16s %lld\n", it.key().c_str(), it.value().get<long long>());
      else
        std::printf("  %-16s %.3f\n", it.key().c_str(), it.value().get<double>());
    }
  }
  return 0;
}

int cmd_simulate(const std::string& path, int reps, const std::optional<std::uint64_t>& seed, int threads,
                 const std::string& out) {
  auto s = sim::scenario_from_json(slurp(path));
  if (const char* env = std::getenv("DSURV_SEED")) {
    try {
      s.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw InputError("DSURV_SEED must be an unsigned integer");
    }
  }
  if (seed) s.seed = *seed;
  if (reps > 0) s.reps = reps;
  auto summary = sim::replicate(s, {sim::Method::BP, sim::Method::WMH, sim::Method::Plogit}, threads);
  std::string csv = sim::summary_csv(summary);
  if (out.empty())
    std::cout << csv;
  else
    write_file(out, csv);
  return 0;
}

int cmd_discretize(const std::string& path, const std::string& covariates, const GridArgs& g,
                   const std::vector<std::string>& tdc, const std::string& out) {
  auto data = apply_tdc(load_raw(read_csv_file(path), split(covariates), g), tdc);
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
  if (out.empty()) {
    write_person_period(std::cout, data);
  } else {
    std::ofstream f(out);
    if (!f) throw InputError("cannot write " + out);
    write_person_period(f, data);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-time survival regression"};
  app.require_subcommand(1);

  // fit
  std::string model, data_path, covariates, variance = "robust,mb2", x0, curve_out, json_out, format = "table";
  bool person_period = false;
  GridArgs grid;
  std::vector<std::string> tdc;
  SolverOptions opt;
  auto* fit = app.add_subcommand("fit", "fit a regression model");
  fit->add_option("--model", model)->required()->check(CLI::IsMember({"prob", "odds", "plogit"}));
  fit->add_option("--data", data_path)->required();
  fit->add_flag("--person-period", person_period, "input is one row per subject-interval");
  fit->add_option("--covariates", covariates, "comma-separated covariate columns (default all)");
  add_grid_options(fit, grid);
  fit->add_option("--tdc", tdc, "col:thr1,thr2 adds col * 1{t > thr} terms");
  fit->add_option("--variance", variance, "robust,naive,mb,mb2,mb3");
  fit->add_option("--x0", x0, "reference covariates for the survival curve");
  fit->add_option("--curve", curve_out, "write the survival curve CSV");
  fit->add_option("--json", json_out, "write the JSON report");
  fit->add_option("--format", format)->check(CLI::IsMember({"table", "json", "csv"}));
  fit->add_option("--tol", opt.tol);
  fit->add_option("--max-iter", opt.max_iter);

  // discretize
  std::string d_path, d_cov, d_out;
  GridArgs d_grid;
  std::vector<std::string> d_tdc;
  auto* disc = app.add_subcommand("discretize", "write person-period data");
  disc->add_option("--data", d_path)->required();
  disc->add_option("--covariates", d_cov);
  add_grid_options(disc, d_grid);
  disc->add_option("--tdc", d_tdc);
  disc->add_option("--out", d_out);

  // tables
  std::string t_path, layout = "independent", method = "both", t_format = "table";
  auto* tables = app.add_subcommand("tables", "stratified two-sample estimators");
  tables->add_option("--data", t_path)->required();
  tables->add_option("--layout", layout)->check(CLI::IsMember({"independent", "survival"}));
  tables->add_option("--method", method)->check(CLI::IsMember({"bp", "wmh", "both"}));
  tables->add_option("--format", t_format)->check(CLI::IsMember({"table", "json"}));

  // simulate
  std::string scenario, s_out;
  int reps = 0, threads = 1;
  std::optional<std::uint64_t> seed;
  auto* simulate = app.add_subcommand("simulate", "replicate a simulation scenario");
  simulate->add_option("--scenario", scenario)->required();
  simulate->add_option("--reps", reps);
  simulate->add_option("--seed", seed);
  simulate->add_option("--threads", threads)->check(CLI::PositiveNumber);
  simulate->add_option("--out", s_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*fit)
      return cmd_fit(model, data_path, person_period, covariates, grid, tdc, variance, x0, curve_out, json_out,
                     format, opt);
    if (*disc) return cmd_discretize(d_path, d_cov, d_grid, d_tdc, d_out);
    if (*tables) return cmd_tables(t_path, layout, method, t_format);
    if (*simulate) return cmd_simulate(scenario, reps, seed, threads, s_out);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: convergence: " << e.what() << "\n";
    return 2;
  } catch (const SingularMatrixError& e) {
    std::cerr << "error: singular matrix: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
