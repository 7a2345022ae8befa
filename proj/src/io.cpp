#include "aftcc/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace aftcc {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  for (std::string& s : out) {
    const auto b = s.find_first_not_of(" \t\"");
    const auto e = s.find_last_not_of(" \t\"");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

double parse_number(const std::string& cell, const std::string& column, std::size_t line) {
  if (cell == "nan" || cell == "NaN") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size())
    fail(ErrorKind::validation, "line " + std::to_string(line) + ": column '" + column + "' has non-numeric value '" +
                                    cell + "'");
  return v;
}

int parse_flag(const std::string& cell, const std::string& column, std::size_t line) {
  const double v = parse_number(cell, column, line);
  if (v != 0.0 && v != 1.0)
    fail(ErrorKind::validation, "line " + std::to_string(line) + ": column '" + column + "' must be 0 or 1");
  return static_cast<int>(v);
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA" || cell == "na"; }

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Cohort read_cohort_csv(std::istream& in, Transform transform) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::io, "empty input: header row required");
  const std::vector<std::string> header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = k;
  for (const char* req : {"time", "status"})
    if (!col.count(req)) fail(ErrorKind::validation, std::string("missing required column '") + req + "'");
  std::vector<std::size_t> zcols;
  while (col.count("z" + std::to_string(zcols.size() + 1))) zcols.push_back(col["z" + std::to_string(zcols.size() + 1)]);
  if (zcols.empty()) fail(ErrorKind::validation, "missing required column 'z1'");
  const auto d = static_cast<Eigen::Index>(zcols.size());

  auto opt = [&](const char* name) -> std::optional<std::size_t> {
    auto it = col.find(name);
    return it == col.end() ? std::nullopt : std::optional<std::size_t>(it->second);
  };
  const auto c_stratum = opt("stratum"), c_observed = opt("observed"), c_sc = opt("in_subcohort"), c_pi = opt("pi");

  std::vector<Subject> subjects;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      fail(ErrorKind::validation, "line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                                      " fields, found " + std::to_string(cells.size()));
    Subject s;
    s.y = apply_transform(transform, parse_number(cells[col["time"]], "time", lineno));
    s.delta = parse_flag(cells[col["status"]], "status", lineno);
    if (c_observed) s.observed = parse_flag(cells[*c_observed], "observed", lineno);
    if (c_sc) s.in_subcohort = parse_flag(cells[*c_sc], "in_subcohort", lineno);
    if (c_stratum && !is_missing(cells[*c_stratum])) {
      const double v = parse_number(cells[*c_stratum], "stratum", lineno);
      if (v != std::floor(v))
        fail(ErrorKind::validation, "line " + std::to_string(lineno) + ": stratum must be an integer label");
      s.stratum = static_cast<int>(v);
    }
    if (c_pi && !is_missing(cells[*c_pi])) s.pi = parse_number(cells[*c_pi], "pi", lineno);
    s.z = Vector::Constant(d, std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index k = 0; k < d; ++k) {
      const std::string& cell = cells[zcols[static_cast<std::size_t>(k)]];
      const std::string name = "z" + std::to_string(k + 1);
      if (is_missing(cell)) {
        if (s.observed == 1)
          fail(ErrorKind::validation, "line " + std::to_string(lineno) + ": column '" + name +
                                          "' missing for an observed subject");
        continue;
      }
      s.z[k] = parse_number(cell, name, lineno);
    }
    subjects.push_back(std::move(s));
  }
  return Cohort(std::move(subjects), d);
}

Cohort read_cohort_csv_file(const std::string& path, Transform transform) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open input file '" + path + "'");
  return read_cohort_csv(in, transform);
}

StudyConfig parse_study_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::validation, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::validation, "config must be a JSON object");

  static const std::set<std::string> known = {
      "error_dist", "n", "theta0", "cov_prob", "zstar_sensitivity", "zstar_specificity", "target_censoring",
      "censor_lower_quantile", "subcohort_fraction", "replications", "master_seed", "methods", "level", "asym_n",
      "step_scale", "slope_step"};
  std::string unknown;
  for (const auto& item : j.items())
    if (!known.count(item.key())) unknown += (unknown.empty() ? "" : ", ") + item.key();
  if (!unknown.empty()) fail(ErrorKind::validation, "unknown config keys: " + unknown);

  StudyConfig c;
  auto num = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) fail(ErrorKind::validation, std::string("config key '") + key + "' must be a number");
    out = j[key].get<double>();
  };
  auto count = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_unsigned() && !(j[key].is_number_integer() && j[key].get<long long>() >= 0))
      fail(ErrorKind::validation, std::string("config key '") + key + "' must be a nonnegative integer");
    out = j[key].get<std::remove_reference_t<decltype(out)>>();
  };

  if (j.contains("error_dist")) {
    if (!j["error_dist"].is_string()) fail(ErrorKind::validation, "config key 'error_dist' must be a string");
    c.error_dist = parse_error_dist(j["error_dist"].get<std::string>());
  }
  count("n", c.n);
  num("theta0", c.theta0);
  num("cov_prob", c.cov_prob);
  num("zstar_sensitivity", c.zstar_sensitivity);
  num("zstar_specificity", c.zstar_specificity);
  num("target_censoring", c.target_censoring);
  num("censor_lower_quantile", c.censor_lower_quantile);
  num("subcohort_fraction", c.subcohort_fraction);
  count("replications", c.replications);
  count("master_seed", c.master_seed);
  num("level", c.level);
  count("asym_n", c.asym_n);
  num("step_scale", c.step_scale);
  if (j.contains("slope_step")) {
    if (!j["slope_step"].is_string()) fail(ErrorKind::validation, "config key 'slope_step' must be a string");
    c.slope_step = parse_step_rule(j["slope_step"].get<std::string>());
  }
  if (j.contains("methods")) {
    if (!j["methods"].is_array()) fail(ErrorKind::validation, "config key 'methods' must be an array of strings");
    c.methods.clear();
    for (const auto& m : j["methods"]) {
      if (!m.is_string()) fail(ErrorKind::validation, "config key 'methods' must be an array of strings");
      const std::string s = m.get<std::string>();
      const auto colon = s.find(':');
      const Method method = parse_method(s.substr(0, colon));
      if (colon == std::string::npos) {
        c.methods.push_back({method, RhoKind::logrank});
        c.methods.push_back({method, RhoKind::gehan});
      } else {
        c.methods.push_back({method, parse_rho(s.substr(colon + 1))});
      }
    }
  }
  check_config(c);
  return c;
}

StudyConfig read_study_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_study_config(ss.str());
}

std::string study_config_json(const StudyConfig& c) {
  nlohmann::json j;
  j["error_dist"] = to_string(c.error_dist);
  j["n"] = c.n;
  j["theta0"] = c.theta0;
  j["cov_prob"] = c.cov_prob;
  j["zstar_sensitivity"] = c.zstar_sensitivity;
  j["zstar_specificity"] = c.zstar_specificity;
  j["target_censoring"] = c.target_censoring;
  j["censor_lower_quantile"] = c.censor_lower_quantile;
  j["subcohort_fraction"] = c.subcohort_fraction;
  j["replications"] = c.replications;
  j["master_seed"] = c.master_seed;
  j["level"] = c.level;
  j["asym_n"] = c.asym_n;
  j["step_scale"] = c.step_scale;
  j["slope_step"] = to_string(c.slope_step);
  j["methods"] = nlohmann::json::array();
  for (const MethodSpec& m : c.methods) j["methods"].push_back(to_string(m.method) + ":" + to_string(m.rho));
  return j.dump(2);
}

void write_report_csv(std::ostream& out, const StudyReport& report) {
  out << "alpha_fraction,weight,method,bias,emp_var,ave_var,coverage,asym_var,n_ok,n_failed,n_flagged\n";
  for (const StudyRow& r : report.rows) {
    out << format_double(r.alpha_fraction) << ',' << to_string(r.weight) << ',' << to_string(r.method) << ','
        << format_double(r.bias) << ',' << format_double(r.emp_var) << ',' << format_double(r.ave_var) << ','
        << format_double(r.coverage) << ',' << format_double(r.asym_var) << ',' << r.n_ok << ',' << r.n_failed
        << ',' << r.n_flagged << '\n';
  }
}

StudyReport read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::io, "empty report");
  const auto header = split_csv_line(line);
  if (header.size() < 11 || header[0] != "alpha_fraction") fail(ErrorKind::validation, "not a study report CSV");
  StudyReport rep;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != header.size()) fail(ErrorKind::validation, "report line " + std::to_string(lineno) + " malformed");
    StudyRow r;
    r.alpha_fraction = parse_number(c[0], "alpha_fraction", lineno);
    r.weight = parse_rho(c[1]);
    r.method = parse_method(c[2]);
    r.bias = parse_number(c[3], "bias", lineno);
    r.emp_var = parse_number(c[4], "emp_var", lineno);
    r.ave_var = parse_number(c[5], "ave_var", lineno);
    r.coverage = parse_number(c[6], "coverage", lineno);
    r.asym_var = parse_number(c[7], "asym_var", lineno);
    r.n_ok = static_cast<std::size_t>(parse_number(c[8], "n_ok", lineno));
    r.n_failed = static_cast<std::size_t>(parse_number(c[9], "n_failed", lineno));
    r.n_flagged = static_cast<std::size_t>(parse_number(c[10], "n_flagged", lineno));
    rep.rows.push_back(r);
  }
  return rep;
}

std::string format_report_table(const StudyReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(7) << "alpha" << std::setw(9) << "weight" << std::setw(7) << "method" << std::right
     << std::setw(9) << "bias" << std::setw(10) << "emp.var" << std::setw(10) << "ave.var" << std::setw(8) << "CP%"
     << std::setw(10) << "asym.var" << std::setw(8) << "failed" << '\n';
  os << std::fixed;
  for (const StudyRow& r : report.rows) {
    os << std::left << std::setw(7) << std::setprecision(2) << r.alpha_fraction << std::setw(9) << to_string(r.weight)
       << std::setw(7) << static_cast<int>(r.method) << std::right << std::setprecision(3) << std::setw(9) << r.bias
       << std::setw(10) << r.emp_var << std::setw(10) << r.ave_var << std::setprecision(1) << std::setw(8)
       << 100.0 * r.coverage << std::setprecision(3) << std::setw(10) << r.asym_var << std::setw(8) << r.n_failed
       << '\n';
  }
  return os.str();
}

void write_efficiency_csv(std::ostream& out, const std::vector<EfficiencyRow>& rows) {
  out << "fraction,weight,method,asym_var,rel_eff\n";
  for (const EfficiencyRow& r : rows)
    out << format_double(r.fraction) << ',' << to_string(r.weight) << ',' << to_string(r.method) << ','
        << format_double(r.asym_var) << ',' << format_double(r.rel_eff) << '\n';
}

std::vector<EfficiencyRow> read_efficiency_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::io, "empty efficiency table");
  std::vector<EfficiencyRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 5) fail(ErrorKind::validation, "efficiency line " + std::to_string(lineno) + " malformed");
    rows.push_back({parse_number(c[0], "fraction", lineno), parse_rho(c[1]), parse_method(c[2]),
                    parse_number(c[3], "asym_var", lineno), parse_number(c[4], "rel_eff", lineno)});
  }
  return rows;
}

}  // namespace aftcc
