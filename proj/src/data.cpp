#include "dsurv/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dsurv {

TimeGrid::TimeGrid(std::vector<double> breakpoints) : t_(std::move(breakpoints)) {
  if (t_.empty()) throw InputError("time grid is empty");
  for (std::size_t k = 0; k < t_.size(); ++k) {
    if (!std::isfinite(t_[k])) throw InputError("time grid has a non-finite breakpoint");
    if (t_[k] <= 0) throw InputError("time grid breakpoints must be positive");
    if (k > 0 && t_[k] <= t_[k - 1]) throw InputError("time grid must be strictly increasing");
  }
}

TimeGrid TimeGrid::equal_width(double width, double max_time) {
  if (!(width > 0) || !std::isfinite(width)) throw InputError("bin width must be positive");
  if (!std::isfinite(max_time) || max_time < 0) throw InputError("bad maximum time");
  long k = std::max(1L, static_cast<long>(std::ceil(max_time / width)));
  while (k * width < max_time) ++k;
  std::vector<double> t(k);
  for (long i = 0; i < k; ++i) t[i] = (i + 1) * width;
  return TimeGrid(std::move(t));
}

TimeGrid TimeGrid::from_times(const std::vector<double>& times) {
  std::vector<double> t;
  for (double v : times)
    if (v > 0) t.push_back(v);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  if (t.empty()) throw InputError("no positive times to build a grid from");
  return TimeGrid(std::move(t));
}

DiscreteSurvivalData::DiscreteSurvivalData(TimeGrid grid, std::vector<SubjectRecord> subjects,
                                           std::vector<std::string> names)
    : grid_(std::move(grid)), subjects_(std::move(subjects)), names_(std::move(names)) {
  const int J = grid_.J();
  if (J == 0) throw InputError("time grid is empty");
  const int d = static_cast<int>(names_.size());
  for (const auto& s : subjects_) {
    if (s.y_index < 0 || s.y_index > J) throw InputError("subject " + s.id + ": y_index out of range");
    if (s.delta && s.y_index < 1) throw InputError("subject " + s.id + ": event before the first interval");
    if (s.x.d() != d) throw InputError("subject " + s.id + ": wrong covariate dimension");
    if (s.x.time_varying() && s.x.rows().rows() != J)
      throw InputError("subject " + s.id + ": time-varying path must have J rows");
    if (!s.x.rows().allFinite()) throw InputError("subject " + s.id + ": non-finite covariate");
  }
}

bool DiscreteSurvivalData::time_varying() const {
  return std::any_of(subjects_.begin(), subjects_.end(),
                     [](const SubjectRecord& s) { return s.x.time_varying(); });
}

DiscreteSurvivalData discretize(const std::vector<RawRecord>& records, const TimeGrid& grid,
                                CensorOption option, std::vector<std::string> names) {
  const auto& t = grid.breakpoints();
  const int J = grid.J();
  if (J == 0) throw InputError("time grid is empty");
  std::vector<SubjectRecord> out;
  out.reserve(records.size());
  int late_events = 0;
  for (const auto& r : records) {
    if (std::isnan(r.time)) throw InputError("record " + r.id + ": time is NaN");
    if (r.time < 0) throw InputError("record " + r.id + ": negative time");
    SubjectRecord s;
    s.id = r.id;
    s.x = CovariatePath(r.x);
    if (r.status) {
      // (t_{j-1}, t_j]
      int j = static_cast<int>(std::lower_bound(t.begin(), t.end(), r.time) - t.begin()) + 1;
      if (j > J) {
        ++late_events;
        s.y_index = J;
        s.delta = false;
      } else {
        s.y_index = j;
        s.delta = true;
      }
    } else {
      // [t_{j-1}, t_j)
      int j = static_cast<int>(std::upper_bound(t.begin(), t.end(), r.time) - t.begin()) + 1;
      int y = option == CensorOption::CensoredEarly ? j - 1 : j;
      s.y_index = std::min(y, J);
      s.delta = false;
    }
    out.push_back(std::move(s));
  }
  DiscreteSurvivalData data(grid, std::move(out), std::move(names));
  if (late_events > 0)
    data.warnings.push_back(std::to_string(late_events) + " event(s) after the last breakpoint recorded as censored");
  return data;
}

DiscreteSurvivalData expand_step_terms(const DiscreteSurvivalData& data, int base_column,
                                       const std::vector<double>& thresholds) {
  if (base_column < 0 || base_column >= data.d()) throw InputError("bad covariate column index");
  if (thresholds.empty()) return data;
  const int J = data.J();
  const double tJ = data.grid().t(J);
  for (double thr : thresholds)
    if (!(thr >= 0 && thr < tJ)) throw InputError("step threshold outside the time grid");

  const int d = data.d();
  const int m = static_cast<int>(thresholds.size());
  auto names = data.names();
  for (int k = 0; k < m; ++k) names.push_back(names[base_column] + std::to_string(k + 2));

  std::vector<SubjectRecord> subjects;
  subjects.reserve(data.n());
  for (const auto& s : data.subjects()) {
    Eigen::MatrixXd rows(J, d + m);
    for (int j = 1; j <= J; ++j) {
      Eigen::RowVectorXd xj = s.x.at(j);
      rows.row(j - 1).head(d) = xj;
      for (int k = 0; k < m; ++k)
        rows(j - 1, d + k) = data.grid().t(j) > thresholds[k] ? xj(base_column) : 0.0;
    }
    SubjectRecord r = s;
    r.x = CovariatePath(std::move(rows));
    subjects.push_back(std::move(r));
  }
  DiscreteSurvivalData out(data.grid(), std::move(subjects), std::move(names));
  out.warnings = data.warnings;
  return out;
}

RiskSetSummary risk_summary(const DiscreteSurvivalData& data) {
  const int J = data.J();
  RiskSetSummary s;
  s.n.assign(J, 0);
  s.T.assign(J, 0);
  std::vector<int> leave(J + 1, 0);
  for (const auto& r : data.subjects()) {
    ++leave[r.y_index];
    if (r.delta) ++s.T[r.y_index - 1];
  }
  int at_risk = data.n() - leave[0];
  for (int j = 1; j <= J; ++j) {
    s.n[j - 1] = at_risk;
    at_risk -= leave[j];
  }
  return s;
}

RiskSets::RiskSets(const DiscreteSurvivalData& data)
    : n(data.n()), d(data.d()), J(data.J()), times(data.grid().breakpoints()), summary(risk_summary(data)) {
  const auto& subj = data.subjects();
  // subjects ordered by decreasing y so risk set j is a prefix
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return subj[a].y_index > subj[b].y_index; });
  for (int j = 1; j <= J; ++j) {
    const int nj = summary.n[j - 1];
    if (summary.T[j - 1] == 0 || nj == 0) continue;
    RiskSet rs;
    rs.j = j;
    rs.members.assign(order.begin(), order.begin() + nj);
    rs.x.resize(nj, d);
    rs.d.resize(nj);
    for (int k = 0; k < nj; ++k) {
      const auto& s = subj[rs.members[k]];
      rs.x.row(k) = s.x.at(j);
      rs.d(k) = (s.y_index == j && s.delta) ? 1.0 : 0.0;
    }
    rs.events = summary.T[j - 1];
    sets.push_back(std::move(rs));
  }
}

RiskSets RiskSets::shifted(const Eigen::VectorXd& x0) const {
  if (x0.size() != d) throw InputError("reference covariate vector has the wrong length");
  RiskSets out = *this;
  for (auto& rs : out.sets) rs.x.rowwise() -= x0.transpose();
  return out;
}

}  // namespace dsurv
