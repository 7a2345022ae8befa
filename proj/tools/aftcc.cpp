// Command-line driver: fit, simulate, efficiency.
#include "aftcc/io.hpp"
#include "aftcc/sim_study.hpp"
#include "aftcc/solver.hpp"
#include "aftcc/validation.hpp"
#include "aftcc/variance.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

using namespace aftcc;
using nlohmann::json;

namespace {

enum ExitCode { exit_ok = 0, exit_validation = 2, exit_numeric = 3, exit_io = 4 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return exit_validation;
    case ErrorKind::numeric: return exit_numeric;
    case ErrorKind::io: return exit_io;
  }
  return exit_numeric;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot open output file '" + path + "'");
  out << text;
  if (!out) fail(ErrorKind::io, "write failed for '" + path + "'");
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

// "scheme" or "scheme:alpha_source".
WeightPlan parse_plan(const std::string& text, const Cohort& cohort) {
  WeightPlan plan;
  const auto colon = text.find(':');
  plan.scheme = parse_scheme(text.substr(0, colon));
  if (colon != std::string::npos) plan.alpha_source = parse_alpha_source(text.substr(colon + 1));
  if (plan.alpha_source == AlphaSource::estimated_fractions) {
    std::set<int> labels;
    for (const Subject& s : cohort)
      if (s.stratum && in_alpha_pool(plan.scheme, s)) labels.insert(*s.stratum);
    plan.strata.assign(labels.begin(), labels.end());
    if (plan.strata.empty()) fail(ErrorKind::validation, "estimated fractions need a 'stratum' column");
  }
  return plan;
}

struct FitArgs {
  std::string input;
  std::string out;
  std::string transform = "identity";
  std::string scheme = "full";
  std::string rho = "gehan";
  double level = 0.95;
  bool force = false;
};

int fit_cmd(const FitArgs& a) {
  if (!(a.level > 0.0 && a.level < 1.0)) fail(ErrorKind::validation, "--level must lie in (0, 1)");
  const Cohort cohort = read_cohort_csv_file(a.input, parse_transform(a.transform));
  const WeightPlan plan = parse_plan(a.scheme, cohort);
  const RhoKind rho = parse_rho(a.rho);
  const SolveOptions options;

  const std::vector<Violation> violations = validate_cohort(cohort, plan, options.policy);
  for (const Violation& v : violations) std::cerr << "violation (" << to_string(v.kind) << "): " << v.message << '\n';
  const bool fatal = std::any_of(violations.begin(), violations.end(), [](const Violation& v) {
    return v.kind == ViolationKind::no_events || v.kind == ViolationKind::too_few_subjects ||
           v.kind == ViolationKind::plan_incompatible;
  });
  if (!violations.empty() && (!a.force || fatal)) {
    std::cerr << "error: " << violations.front().message << '\n';
    return exit_validation;
  }

  const Weights weights = assign_weights(cohort, plan);
  const FitResult fit = solve(cohort, weights.omega, weights.w, rho, options);
  const VarianceReport var =
      estimate_variance(cohort, weights, plan.scheme, fit.theta_hat, rho, 1.0, options.policy, StepRule::estimator);
  const std::vector<Interval> ci = confidence_interval(fit.theta_hat, var, a.level);

  json doc;
  doc["n"] = cohort.size();
  doc["events"] = cohort.num_events();
  doc["rho"] = to_string(rho);
  doc["theta_hat"] = vector_json(fit.theta_hat);
  json se = json::array(), lo = json::array(), hi = json::array();
  for (Eigen::Index j = 0; j < fit.theta_hat.size(); ++j) {
    se.push_back(std::sqrt(var.variance()(j, j)));
    lo.push_back(ci[static_cast<std::size_t>(j)].lo);
    hi.push_back(ci[static_cast<std::size_t>(j)].hi);
  }
  doc["std_error"] = se;
  doc["interval"] = {{"level", a.level}, {"lower", lo}, {"upper", hi}};
  doc["scaled_norm"] = fit.scaled_norm;
  doc["psi_at_solution"] = vector_json(fit.psi_at_solution);
  doc["iterations"] = fit.iterations;
  doc["dropped_terms"] = fit.dropped_terms;
  json flat = json::array();
  for (const auto& r : fit.flat_region) {
    if (r)
      flat.push_back({{"lo", r->lo}, {"hi", std::isfinite(r->hi) ? json(r->hi) : json("inf")}});
    else
      flat.push_back(nullptr);
  }
  doc["flags"] = {{"above_threshold", fit.above_threshold},
                  {"degenerate", fit.degenerate},
                  {"possibly_nonunique", fit.possibly_nonunique},
                  {"slope_plateau", var.plateau_warning},
                  {"flat_region", flat},
                  {"forced_violations", violations.size()}};
  doc["sigma0"] = matrix_json(var.sigma0);
  if (var.sigma_star) doc["sigma_star"] = matrix_json(*var.sigma_star);
  doc["condition_number"] = var.condition_number;
  json p = {{"scheme", to_string(plan.scheme)}, {"alpha_source", to_string(plan.alpha_source)},
            {"strata", plan.strata}};
  if (weights.alpha) {
    p["alpha_hat"] = weights.alpha->alpha_hat;
    p["gamma_hat"] = weights.alpha->gamma_hat;
    json counts = json::array();
    for (const StratumCount& c : weights.alpha->counts) counts.push_back({{"sampled", c.sampled}, {"total", c.total}});
    p["counts"] = counts;
  }
  doc["plan"] = p;
  write_output(a.out, doc.dump(2) + "\n");
  return exit_ok;
}

struct StudyArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string fractions;
};

StudyConfig load_config(const StudyArgs& a) {
  StudyConfig c = a.config.empty() ? StudyConfig{} : read_study_config_file(a.config);
  if (a.seed) c.master_seed = *a.seed;
  if (a.threads == 0) fail(ErrorKind::validation, "--threads must be positive");
  return c;
}

int simulate_cmd(const StudyArgs& a) {
  const StudyConfig config = load_config(a);
  const StudyReport report = run_study(config, a.threads);
  std::ostringstream csv;
  write_report_csv(csv, report);
  write_output(a.out, csv.str());
  if (!a.out.empty() && a.out != "-") std::cout << format_report_table(report);
  return exit_ok;
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0) fail(ErrorKind::validation, "--fractions: not a number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

int efficiency_cmd(const StudyArgs& a) {
  const StudyConfig config = load_config(a);
  const std::vector<double> grid = parse_fractions(a.fractions);
  if (grid.empty()) fail(ErrorKind::validation, "--fractions: empty fraction grid");
  const std::size_t large_n = config.asym_n > 0 ? config.asym_n : 200000;
  const std::vector<EfficiencyRow> rows = efficiency_curve(config, grid, large_n);
  std::ostringstream csv;
  write_efficiency_csv(csv, rows);
  write_output(a.out, csv.str());
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted rank-based AFT estimation for case-cohort and two-phase designs"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_sc = app.add_subcommand("fit", "Fit the AFT model to a cohort CSV");
  fit_sc->add_option("--input", fit.input, "Cohort CSV")->required();
  fit_sc->add_option("--out", fit.out, "Result JSON (default stdout)");
  fit_sc->add_option("--transform", fit.transform, "Time transform: identity | log");
  fit_sc->add_option("--scheme", fit.scheme,
                     "Weights: full | predictable | nonpredictable | mar, optionally ':true' or ':estimated'");
  fit_sc->add_option("--rho", fit.rho, "Weight function: gehan | logrank");
  fit_sc->add_option("--level", fit.level, "Confidence level");
  fit_sc->add_flag("--force", fit.force, "Proceed despite non-fatal validation violations");

  StudyArgs sim;
  auto* sim_sc = app.add_subcommand("simulate", "Run a Monte Carlo study and write the report CSV");
  StudyArgs eff;
  auto* eff_sc = app.add_subcommand("efficiency", "Asymptotic relative efficiency over sampling fractions");
  for (auto [sc, args] : {std::pair{sim_sc, &sim}, std::pair{eff_sc, &eff}}) {
    sc->add_option("--config", args->config, "Study configuration JSON");
    sc->add_option("--out", args->out, "Output CSV (default stdout)");
    sc->add_option("--seed", args->seed, "Override master_seed");
    sc->add_option("--threads", args->threads, "Worker threads");
  }
  eff_sc->add_option("--fractions", eff.fractions, "Comma-separated subcohort fractions")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_validation;
  }

  try {
    if (*fit_sc) return fit_cmd(fit);
    if (*sim_sc) return simulate_cmd(sim);
    if (*eff_sc) return efficiency_cmd(eff);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_numeric;
  }
  return exit_ok;
}
