#include "dsurv/twosample.hpp"

#include <array>
#include <cmath>
#include <functional>

namespace dsurv::twosample {

void StratifiedTables::validate() const {
  if (strata.empty()) throw InputError("no strata");
  for (std::size_t j = 0; j < strata.size(); ++j) {
    const auto& s = strata[j];
    if (s.n11 < 0 || s.n12 < 0 || s.n21 < 0 || s.n22 < 0) throw InputError("negative count in stratum " + std::to_string(j + 1));
    if (layout == Layout::Survival && j + 1 < strata.size()) {
      const auto& nx = strata[j + 1];
      if (nx.n1() > s.n12 || nx.n2() > s.n22)
        throw InputError("strata are not nested risk sets at stratum " + std::to_string(j + 2));
    }
  }
}

long StratifiedTables::n() const {
  if (layout == Layout::Survival) return strata.front().n1() + strata.front().n2();
  long n = 0;
  for (const auto& s : strata) n += s.n1() + s.n2();
  return n;
}

StratifiedTables read_tables(const CsvTable& csv, Layout layout) {
  const char* cols[] = {"stratum", "n11", "n12", "n21", "n22"};
  int idx[5];
  for (int k = 0; k < 5; ++k) {
    idx[k] = csv.column(cols[k]);
    if (idx[k] < 0) throw InputError(std::string("missing column '") + cols[k] + "'");
  }
  StratifiedTables t;
  t.layout = layout;
  for (const auto& row : csv.rows) {
    Stratum s;
    long* f[] = {&s.n11, &s.n12, &s.n21, &s.n22};
    for (int k = 0; k < 4; ++k) {
      double v = parse_double(row[idx[k + 1]], cols[k + 1]);
      if (v != std::floor(v) || v < 0) throw InputError(std::string("count ") + cols[k + 1] + " must be a non-negative integer");
      *f[k] = static_cast<long>(v);
    }
    t.labels.push_back(row[idx[0]]);
    t.strata.push_back(s);
  }
  t.validate();
  return t;
}

StratifiedTables tables_from_data(const DiscreteSurvivalData& data, int column) {
  if (column < 0 || column >= data.d()) throw InputError("bad covariate column index");
  if (data.time_varying()) throw InputError("two-sample tables need a static group covariate");
  StratifiedTables t;
  t.layout = Layout::Survival;
  for (int j = 1; j <= data.J(); ++j) {
    Stratum s;
    for (const auto& r : data.subjects()) {
      if (r.y_index < j) continue;
      double x = r.x.at(j)(column);
      if (x != 0 && x != 1) throw InputError("group covariate must be 0/1");
      bool ev = r.y_index == j && r.delta;
      if (x == 1)
        (ev ? s.n11 : s.n12)++;
      else
        (ev ? s.n21 : s.n22)++;
    }
    t.strata.push_back(s);
    t.labels.push_back(std::to_string(j));
  }
  return t;
}

DiscreteSurvivalData expand_tables(const StratifiedTables& t) {
  if (t.layout != Layout::Survival) throw InputError("expansion needs survival-layout tables");
  t.validate();
  const int J = static_cast<int>(t.strata.size());
  std::vector<SubjectRecord> subjects;
  auto add = [&](int y, bool ev, double x, long count) {
    for (long c = 0; c < count; ++c) {
      SubjectRecord s;
      s.id = std::to_string(subjects.size() + 1);
      s.y_index = y;
      s.delta = ev;
      s.x = CovariatePath(Eigen::RowVectorXd(Eigen::RowVectorXd::Constant(1, x)));
      subjects.push_back(std::move(s));
    }
  };
  for (int j = 0; j < J; ++j) {
    const auto& s = t.strata[j];
    long next1 = j + 1 < J ? t.strata[j + 1].n1() : 0;
    long next2 = j + 1 < J ? t.strata[j + 1].n2() : 0;
    add(j + 1, true, 1, s.n11);
    add(j + 1, false, 1, s.n12 - next1);
    add(j + 1, true, 0, s.n21);
    add(j + 1, false, 0, s.n22 - next2);
  }
  std::vector<double> grid(J);
  for (int j = 0; j < J; ++j) grid[j] = j + 1;
  return DiscreteSurvivalData(TimeGrid(grid), std::move(subjects), {"x"});
}

namespace {

double root(const std::function<double(double)>& f) {
  double lo = -10, hi = 10;
  double flo = f(lo), fhi = f(hi);
  int expand = 0;
  while (flo * fhi > 0) {
    if (++expand > 8) throw ConvergenceError("two-sample estimating equation has no finite root");
    lo *= 2;
    hi *= 2;
    flo = f(lo);
    fhi = f(hi);
  }
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  for (int it = 0; it < 400; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    double fm = f(mid);
    if (fm == 0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// influence values per stratum: [group 1 event, group 1 non-event, group 2 event, group 2 non-event]
using Cat = std::array<double, 4>;

double robust_meat(const StratifiedTables& t, const std::vector<Cat>& f) {
  double m = 0;
  const std::size_t J = t.strata.size();
  if (t.layout == Layout::Independent) {
    for (std::size_t j = 0; j < J; ++j) {
      const auto& s = t.strata[j];
      m += s.n11 * f[j][0] * f[j][0] + s.n12 * f[j][1] * f[j][1] + s.n21 * f[j][2] * f[j][2] +
           s.n22 * f[j][3] * f[j][3];
    }
    return m;
  }
  double c1 = 0, c2 = 0;  // running sums over earlier strata as a survivor
  for (std::size_t j = 0; j < J; ++j) {
    const auto& s = t.strata[j];
    long next1 = j + 1 < J ? t.strata[j + 1].n1() : 0;
    long next2 = j + 1 < J ? t.strata[j + 1].n2() : 0;
    double e1 = c1 + f[j][0], s1 = c1 + f[j][1];
    double e2 = c2 + f[j][2], s2 = c2 + f[j][3];
    m += s.n11 * e1 * e1 + (s.n12 - next1) * s1 * s1 + s.n21 * e2 * e2 + (s.n22 - next2) * s2 * s2;
    c1 += f[j][1];
    c2 += f[j][3];
  }
  return m;
}

}  // namespace

double bp_score(const StratifiedTables& t, double g) {
  double eg = std::exp(g), s = 0;
  for (const auto& st : t.strata) {
    double den = st.n1() * eg + st.n2();
    if (den > 0) s += (st.n11 * st.n2() - eg * st.n21 * st.n1()) / den;
  }
  return s;
}

double wmh_score(const StratifiedTables& t, double b) {
  double eb = std::exp(b), s = 0;
  for (const auto& st : t.strata) {
    double den = st.n1() * eb + st.n2();
    if (den > 0) s += (st.n11 * st.n22 - eb * st.n12 * st.n21) / den;
  }
  return s;
}

BpResult bp_two_sample(const StratifiedTables& t) {
  t.validate();
  BpResult r;
  r.n = t.n();
  for (const auto& s : t.strata) r.skipped += (s.n11 * s.n2() == 0 && s.n21 * s.n1() == 0);
  if (r.skipped == static_cast<int>(t.strata.size())) throw InputError("no informative stratum");
  r.gamma = root([&](double g) { return bp_score(t, g); });

  const double eg = std::exp(r.gamma);
  double bsum = 0, absum = 0, ab2sum = 0;
  std::vector<Cat> f(t.strata.size(), Cat{0, 0, 0, 0});
  for (std::size_t j = 0; j < t.strata.size(); ++j) {
    const auto& s = t.strata[j];
    const double n1 = s.n1(), n2 = s.n2();
    const double den = n1 * eg + n2;
    if (den == 0) continue;
    const double T = s.n11 + s.n21;
    bsum += T * n1 * n2 * eg / (den * den);
    ab2sum += eg * (n2 * s.n12 * s.n21 + n1 * s.n11 * s.n22) / (den * den);
    const double p1 = T * eg / den, p2 = T / den;
    const double c1 = n2 / den, c2 = -n1 * eg / den;  // x - weighted mean
    absum += n1 * p1 * (1 - p1) * c1 * c1 + n2 * p2 * (1 - p2) * c2 * c2;
    f[j] = {(1 - p1) * c1, -p1 * c1, (1 - p2) * c2, -p2 * c2};
  }
  const double n = static_cast<double>(r.n);
  r.b = bsum / n;
  r.a_b = absum / n;
  r.a_b2 = ab2sum / n;
  r.var_naive = 1 / bsum;
  r.var_b = absum / (bsum * bsum);
  r.var_b2 = ab2sum / (bsum * bsum);
  r.var_robust = robust_meat(t, f) / (bsum * bsum);
  return r;
}

WmhResult wmh_two_sample(const StratifiedTables& t) {
  t.validate();
  WmhResult r;
  r.n = t.n();
  for (const auto& s : t.strata) r.skipped += (s.n11 * s.n22 == 0 && s.n12 * s.n21 == 0);
  if (r.skipped == static_cast<int>(t.strata.size())) throw InputError("no informative stratum");
  r.beta = root([&](double b) { return wmh_score(t, b); });

  const double eb = std::exp(r.beta);
  double hsum = 0, g2sum = 0, g3sum = 0;
  std::vector<Cat> f(t.strata.size(), Cat{0, 0, 0, 0});
  for (std::size_t j = 0; j < t.strata.size(); ++j) {
    const auto& s = t.strata[j];
    const double n11 = s.n11, n12 = s.n12, n21 = s.n21, n22 = s.n22;
    const double n1 = s.n1(), n2 = s.n2();
    const double den = n1 * eb + n2;
    if (den == 0) continue;
    const double den2 = den * den;
    hsum += eb * (n1 * n11 * n22 + n2 * n12 * n21) / den2;
    g2sum += eb * (n12 * n21 + n22 * n11 + n1 * n22 * n21 + n2 * n12 * n11) / den2;
    g3sum += (eb * n12 * n21 * (n22 + eb * n21) + n11 * n22 * (n11 + eb * n12)) / den2;

    const double u0 = n12 * eb + n22;
    if (u0 == 0) continue;
    const double T = n11 + n21;
    const double c = n12 * eb / u0;
    const double k2 = (n11 * u0 - T * n12 * eb) / den;
    // g_j1 + g_j2 for x in {1, 0} and event / non-event
    auto g = [&](double x, double dlt) {
      const double e = x == 1 ? eb : 1.0;
      const double g1 = (dlt * u0 - (1 - dlt) * e * T) / den * (x - c);
      const double g2 = -k2 * (e / den - (1 - dlt) * e / u0);
      return g1 + g2;
    };
    f[j] = {g(1, 1), g(1, 0), g(0, 1), g(0, 0)};
  }
  const double n = static_cast<double>(r.n);
  r.h = hsum / n;
  r.g_b2 = g2sum / n;
  r.g_b3 = g3sum / n;
  r.var_b2 = g2sum / (hsum * hsum);
  r.var_b3 = g3sum / (hsum * hsum);
  r.var_robust = robust_meat(t, f) / (hsum * hsum);
  return r;
}

}  // namespace dsurv::twosample
