#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsurv {

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class TimeGrid {
public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> breakpoints);

  // w, 2w, ... up to the first multiple of w that covers max_time
  static TimeGrid equal_width(double width, double max_time);
  // sorted distinct positive values
  static TimeGrid from_times(const std::vector<double>& times);

  int J() const { return static_cast<int>(t_.size()); }
  // 1-based; t(0) == 0
  double t(int j) const { return j == 0 ? 0.0 : t_.at(j - 1); }
  const std::vector<double>& breakpoints() const { return t_; }

private:
  std::vector<double> t_;
};

enum class CensorOption { CensoredEarly, CensoredLate };

/** Covariates for one subject: one row (static) or J rows (row j-1 is X(t_j)). */
class CovariatePath {
public:
  CovariatePath() = default;
  explicit CovariatePath(Eigen::RowVectorXd x) : m_(std::move(x)) {}
  explicit CovariatePath(Eigen::MatrixXd rows) : m_(std::move(rows)) {}

  bool time_varying() const { return m_.rows() > 1; }
  int d() const { return static_cast<int>(m_.cols()); }
  Eigen::RowVectorXd at(int j) const { return time_varying() ? m_.row(j - 1) : m_.row(0); }
  const Eigen::MatrixXd& rows() const { return m_; }
  Eigen::MatrixXd& rows() { return m_; }

private:
  Eigen::MatrixXd m_;
};

struct SubjectRecord {
  std::string id;
  int y_index = 0;
  bool delta = false;
  CovariatePath x;
};

class DiscreteSurvivalData {
public:
  DiscreteSurvivalData() = default;
  DiscreteSurvivalData(TimeGrid grid, std::vector<SubjectRecord> subjects,
                       std::vector<std::string> names);

  const TimeGrid& grid() const { return grid_; }
  const std::vector<SubjectRecord>& subjects() const { return subjects_; }
  const std::vector<std::string>& names() const { return names_; }
  int n() const { return static_cast<int>(subjects_.size()); }
  int d() const { return static_cast<int>(names_.size()); }
  int J() const { return grid_.J(); }
  bool time_varying() const;

  bool at_risk(int j, int i) const { return subjects_[i].y_index >= j; }
  bool event(int j, int i) const { return subjects_[i].y_index == j && subjects_[i].delta; }

  std::vector<std::string> warnings;

private:
  TimeGrid grid_;
  std::vector<SubjectRecord> subjects_;
  std::vector<std::string> names_;
};

struct RawRecord {
  std::string id;
  double time = 0;
  bool status = false;
  Eigen::RowVectorXd x;
};

DiscreteSurvivalData discretize(const std::vector<RawRecord>& records, const TimeGrid& grid,
                                CensorOption option, std::vector<std::string> names);

// Appends base(t_j) * 1{t_j > thr} for every threshold; names are base2, base3, ...
DiscreteSurvivalData expand_step_terms(const DiscreteSurvivalData& data, int base_column,
                                       const std::vector<double>& thresholds);

struct RiskSetSummary {
  std::vector<int> n;  // n_j, j = 1..J
  std::vector<int> T;  // T_j
};

RiskSetSummary risk_summary(const DiscreteSurvivalData& data);

/** Members of risk set j with their covariates X_i(t_j) and event indicators. */
struct RiskSet {
  int j = 0;
  std::vector<int> members;
  Eigen::MatrixXd x;
  Eigen::VectorXd d;
  int events = 0;
  int size() const { return static_cast<int>(members.size()); }
};

/** Risk sets that carry at least one event; empty ones contribute nothing to any estimator. */
class RiskSets {
public:
  RiskSets() = default;
  explicit RiskSets(const DiscreteSurvivalData& data);

  // every covariate row replaced by x - x0
  RiskSets shifted(const Eigen::VectorXd& x0) const;

  int n = 0;
  int d = 0;
  int J = 0;
  std::vector<double> times;  // t_1..t_J
  std::vector<RiskSet> sets;
  RiskSetSummary summary;
};

}  // namespace dsurv
