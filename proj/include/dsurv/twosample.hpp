#pragma once

#include "dsurv/csv.hpp"
#include "dsurv/data.hpp"

#include <string>
#include <vector>

namespace dsurv::twosample {

/** One 2x2 table: events / non-events in group 1 (X = 1) and group 2 (X = 0). */
struct Stratum {
  long n11 = 0, n12 = 0, n21 = 0, n22 = 0;
  long n1() const { return n11 + n12; }
  long n2() const { return n21 + n22; }
};

// Independent: every subject sits in exactly one table.
// Survival: tables are successive risk sets of one two-sample cohort.
enum class Layout { Independent, Survival };

struct StratifiedTables {
  std::vector<Stratum> strata;
  std::vector<std::string> labels;
  Layout layout = Layout::Independent;

  void validate() const;
  long n() const;  // number of distinct subjects
};

StratifiedTables read_tables(const CsvTable& csv, Layout layout = Layout::Independent);

// Tables of a binary covariate column across the risk sets of `data` (static covariate).
StratifiedTables tables_from_data(const DiscreteSurvivalData& data, int column);

// Subject-level dataset reproducing survival-layout tables on grid 1..J with X in {0,1}.
DiscreteSurvivalData expand_tables(const StratifiedTables& tables);

// Per-n scalars follow the regression modules; var_* are variances of the estimate.
struct BpResult {
  double gamma = 0;
  double b = 0;  // B(gamma-hat)
  double a_b = 0;
  double a_b2 = 0;
  double var_naive = 0;
  double var_b = 0;
  double var_b2 = 0;
  double var_robust = 0;
  long n = 0;
  int skipped = 0;
};

struct WmhResult {
  double beta = 0;
  double h = 0;  // H(beta-hat)
  double g_b2 = 0;
  double g_b3 = 0;
  double var_b2 = 0;
  double var_b3 = 0;
  double var_robust = 0;
  long n = 0;
  int skipped = 0;
};

double bp_score(const StratifiedTables& t, double gamma);
double wmh_score(const StratifiedTables& t, double beta);

BpResult bp_two_sample(const StratifiedTables& t);
WmhResult wmh_two_sample(const StratifiedTables& t);

}  // namespace dsurv::twosample
