#pragma once

#include "dsurv/data.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dsurv {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;  // -1 if absent
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

struct SubjectTable {
  std::vector<std::string> names;
  std::vector<RawRecord> records;
};

// header: id,time,status,<covariates>; `keep` selects covariate columns by name (all if empty)
SubjectTable read_subjects(const CsvTable& csv, const std::vector<std::string>& keep = {});

// header: id,interval,at_risk,event,<covariates>; intervals run 1..y without gaps
DiscreteSurvivalData read_person_period(const CsvTable& csv, std::optional<TimeGrid> grid = std::nullopt,
                                        const std::vector<std::string>& keep = {});

void write_person_period(std::ostream& out, const DiscreteSurvivalData& data);

double parse_double(const std::string& s, const std::string& what);

}  // namespace dsurv
