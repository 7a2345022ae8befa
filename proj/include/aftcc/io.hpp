// File formats: cohort CSV input, study configuration, report CSVs.
#pragma once

#include "aftcc/data_model.hpp"
#include "aftcc/sim_study.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace aftcc {

// Cohort CSV: header row required, column order free.
//   required  time, status, z1..zd
//   optional  stratum, observed, in_subcohort, pi
// Covariate cells of rows with observed = 0 may be empty or NA.
Cohort read_cohort_csv(std::istream& in, Transform transform);
Cohort read_cohort_csv_file(const std::string& path, Transform transform);

// Study configuration as a JSON object whose keys are StudyConfig field
// names. Unknown keys and malformed values are reported by key name.
StudyConfig parse_study_config(const std::string& text);
StudyConfig read_study_config_file(const std::string& path);
std::string study_config_json(const StudyConfig& config);

// Report CSV columns: alpha_fraction, weight, method, bias, emp_var,
// ave_var, coverage, asym_var, n_ok, n_failed, n_flagged.
void write_report_csv(std::ostream& out, const StudyReport& report);
StudyReport read_report_csv(std::istream& in);
std::string format_report_table(const StudyReport& report);

// Efficiency CSV columns: fraction, weight, method, asym_var, rel_eff.
void write_efficiency_csv(std::ostream& out, const std::vector<EfficiencyRow>& rows);
std::vector<EfficiencyRow> read_efficiency_csv(std::istream& in);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace aftcc
