#include "dsurv/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace dsurv {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::vector<int> covariate_columns(const CsvTable& csv, int first, const std::vector<std::string>& keep) {
  std::vector<int> cols;
  if (keep.empty()) {
    for (int c = first; c < static_cast<int>(csv.header.size()); ++c) cols.push_back(c);
  } else {
    for (const auto& k : keep) {
      int c = csv.column(k);
      if (c < first) throw InputError("missing covariate column '" + k + "'");
      cols.push_back(c);
    }
  }
  return cols;
}

void require(const CsvTable& csv, int pos, const std::string& name) {
  if (static_cast<int>(csv.header.size()) <= pos || csv.header[pos] != name)
    throw InputError("missing column '" + name + "' (expected at position " + std::to_string(pos + 1) + ")");
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  bool first = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_line(line);
    if (first) {
      t.header = std::move(f);
      first = false;
    } else {
      if (f.size() != t.header.size())
        throw InputError("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                         " fields, found " + std::to_string(f.size()));
      t.rows.push_back(std::move(f));
    }
  }
  if (first) throw InputError("empty CSV input");
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return read_csv(in);
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (!s.empty() && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) {
    if (s == "NA" || s == "nan" || s == "NaN") return std::nan("");
    throw InputError("cannot parse " + what + " value '" + s + "'");
  }
  return v;
}

SubjectTable read_subjects(const CsvTable& csv, const std::vector<std::string>& keep) {
  require(csv, 0, "id");
  require(csv, 1, "time");
  require(csv, 2, "status");
  auto cols = covariate_columns(csv, 3, keep);
  SubjectTable out;
  for (int c : cols) out.names.push_back(csv.header[c]);
  for (const auto& row : csv.rows) {
    RawRecord r;
    r.id = row[0];
    r.time = parse_double(row[1], "time");
    double st = parse_double(row[2], "status");
    if (st != 0 && st != 1) throw InputError("status must be 0 or 1 (id " + r.id + ")");
    r.status = st == 1;
    r.x.resize(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) {
      r.x(k) = parse_double(row[cols[k]], csv.header[cols[k]]);
      if (!std::isfinite(r.x(k))) throw InputError("non-finite covariate for id " + r.id);
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

DiscreteSurvivalData read_person_period(const CsvTable& csv, std::optional<TimeGrid> grid,
                                        const std::vector<std::string>& keep) {
  require(csv, 0, "id");
  require(csv, 1, "interval");
  require(csv, 2, "at_risk");
  require(csv, 3, "event");
  auto cols = covariate_columns(csv, 4, keep);
  const int d = static_cast<int>(cols.size());

  struct Rows {
    std::map<int, std::pair<bool, Eigen::RowVectorXd>> by_interval;
  };
  std::vector<std::string> ids;
  std::map<std::string, Rows> subj;
  int maxj = 0;
  for (const auto& row : csv.rows) {
    double ar = parse_double(row[2], "at_risk");
    if (ar == 0) continue;
    if (ar != 1) throw InputError("at_risk must be 0 or 1");
    double jd = parse_double(row[1], "interval");
    int j = static_cast<int>(jd);
    if (j != jd || j < 1) throw InputError("interval must be a positive integer");
    double ev = parse_double(row[3], "event");
    if (ev != 0 && ev != 1) throw InputError("event must be 0 or 1");
    Eigen::RowVectorXd x(d);
    for (int k = 0; k < d; ++k) x(k) = parse_double(row[cols[k]], csv.header[cols[k]]);
    auto [it, fresh] = subj.try_emplace(row[0]);
    if (fresh) ids.push_back(row[0]);
    if (!it->second.by_interval.emplace(j, std::make_pair(ev == 1, x)).second)
      throw InputError("duplicate interval " + std::to_string(j) + " for id " + row[0]);
    maxj = std::max(maxj, j);
  }
  if (!grid) {
    std::vector<double> t(maxj);
    for (int j = 0; j < maxj; ++j) t[j] = j + 1;
    grid = TimeGrid(std::move(t));
  }
  const int J = grid->J();
  if (maxj > J) throw InputError("interval index exceeds the grid");

  std::vector<SubjectRecord> out;
  for (const auto& id : ids) {
    const auto& m = subj[id].by_interval;
    int y = m.rbegin()->first;
    if (static_cast<int>(m.size()) != y || m.begin()->first != 1)
      throw InputError("id " + id + ": intervals must run 1.." + std::to_string(y) + " without gaps");
    Eigen::MatrixXd rows(J, d);
    bool event = false;
    for (const auto& [j, v] : m) {
      if (v.first && j != y) throw InputError("id " + id + ": event before the last at-risk interval");
      event = event || v.first;
      rows.row(j - 1) = v.second;
    }
    for (int j = y + 1; j <= J; ++j) rows.row(j - 1) = rows.row(y - 1);
    SubjectRecord s;
    s.id = id;
    s.y_index = y;
    s.delta = event;
    s.x = CovariatePath(std::move(rows));
    out.push_back(std::move(s));
  }
  std::vector<std::string> names;
  for (int c : cols) names.push_back(csv.header[c]);
  return DiscreteSurvivalData(*grid, std::move(out), std::move(names));
}

void write_person_period(std::ostream& out, const DiscreteSurvivalData& data) {
  out << "id,interval,at_risk,event";
  for (const auto& nm : data.names()) out << ',' << nm;
  out << '\n';
  out << std::setprecision(17);
  for (const auto& s : data.subjects()) {
    for (int j = 1; j <= s.y_index; ++j) {
      out << s.id << ',' << j << ",1," << ((s.delta && j == s.y_index) ? 1 : 0);
      Eigen::RowVectorXd x = s.x.at(j);
      for (int k = 0; k < x.size(); ++k) out << ',' << x(k);
      out << '\n';
    }
  }
}

}  // namespace dsurv
