// Monte Carlo engine for stratified case-cohort designs.
//
// Design: Z ~ Bernoulli(cov_prob), T = theta0 Z + e, C ~ Uniform[a, b] with
// a at a low quantile of e and b calibrated to the target censoring rate. A binary surrogate Z* (given sensitivity and specificity) defines two
// sampling strata with equal expected subcohort counts; the subcohort is an
// independent Bernoulli sample from the whole cohort.
#pragma once

#include "aftcc/data_model.hpp"
#include "aftcc/estimating_function.hpp"
#include "aftcc/solver.hpp"
#include "aftcc/variance.hpp"
#include "aftcc/weight_schemes.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aftcc {

enum class ErrorDist { normal, logistic, extreme_value };

ErrorDist parse_error_dist(const std::string& name);
std::string to_string(ErrorDist e);

// Method numbering: 1 full data, 2/3 predictable true/estimated,
// 4/5 non-predictable true/estimated.
enum class Method { full = 1, pred_true, pred_est, nonpred_true, nonpred_est };

Method parse_method(const std::string& name);
std::string to_string(Method m);
WeightPlan plan_for(Method m);

struct MethodSpec {
  Method method = Method::full;
  RhoKind rho = RhoKind::gehan;
  bool operator==(const MethodSpec&) const = default;
};

std::vector<MethodSpec> all_methods();

struct StudyConfig {
  ErrorDist error_dist = ErrorDist::logistic;
  std::size_t n = 2000;
  double theta0 = 0.0;
  double cov_prob = 0.3;
  double zstar_sensitivity = 0.8;
  double zstar_specificity = 0.8;
  double target_censoring = 0.8;
  double censor_lower_quantile = 0.005;  // error quantile anchoring the censoring window's lower end
  double subcohort_fraction = 0.15;
  std::size_t replications = 500;
  std::uint64_t master_seed = 20090501;
  std::vector<MethodSpec> methods = all_methods();
  double level = 0.95;
  std::size_t asym_n = 200000;  // cohort size for plug-in asymptotic variances; 0 skips
  double step_scale = 1.0;
  StepRule slope_step = StepRule::estimator;
};

void check_config(const StudyConfig& config);

// Error law helpers. The extreme-value law is the minimum type, with
// survival function exp(-e^t).
double error_quantile(ErrorDist dist, double p);
double error_survival(ErrorDist dist, double t);

struct CensoringWindow {
  double a = 0.0;
  double b = 0.0;
};

// P(e > C) for C ~ Uniform[a, b], by adaptive quadrature.
double censoring_rate(ErrorDist dist, const CensoringWindow& window);
CensoringWindow calibrate_censoring(ErrorDist dist, double target_censoring, double lower_quantile = 0.01);

struct AllocationProbs {
  double pi0 = 0.0;  // selection probability when Z* = 0
  double pi1 = 0.0;  // when Z* = 1
};

AllocationProbs allocation_probs(double cov_prob, double zstar_sensitivity, double zstar_specificity,
                                 double fraction);

// Cohort for one replicate, drawn from stream (master_seed, replicate_index).
Cohort generate_cohort(const StudyConfig& config, const CensoringWindow& window, std::uint64_t replicate_index,
                       std::optional<std::size_t> size = std::nullopt);
Cohort generate_cohort(const StudyConfig& config, std::uint64_t replicate_index);

// Copy with every covariate marked observed (the full-data analysis).
Cohort complete_cohort(const Cohort& cohort);

enum ReplicateFlag : unsigned {
  flag_failed = 1u << 0,
  flag_above_threshold = 1u << 1,
  flag_flat_region = 1u << 2,
  flag_nonunique = 1u << 3,
  flag_plateau = 1u << 4,
  flag_degenerate = 1u << 5,
};

struct ReplicateResult {
  double theta_hat = 0.0;
  double variance = 0.0;
  bool covers = false;
  unsigned flags = 0;
  std::string error;
  bool ok() const noexcept { return (flags & flag_failed) == 0; }
};

// Fit one analysis to one simulated cohort. Errors are recorded in the
// result instead of propagating.
ReplicateResult run_replicate(const Cohort& cohort, Method method, RhoKind rho, const StudyConfig& config,
                              std::optional<Vector> seed_theta = std::nullopt);

struct StudyRow {
  double alpha_fraction = 0.0;
  RhoKind weight = RhoKind::gehan;
  Method method = Method::full;
  double bias = 0.0;
  double emp_var = 0.0;
  double ave_var = 0.0;
  double coverage = 0.0;
  double asym_var = 0.0;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  std::size_t n_flagged = 0;
};

struct StudyReport {
  std::vector<StudyRow> rows;
  const StudyRow& row(RhoKind weight, Method method) const;
};

// Per-replicate results, indexed [replicate][method spec].
std::vector<std::vector<ReplicateResult>> run_replicates(const StudyConfig& config, unsigned threads = 1);

StudyReport summarize(const StudyConfig& config, const std::vector<std::vector<ReplicateResult>>& results,
                      const std::vector<double>& asym_vars);

StudyReport run_study(const StudyConfig& config, unsigned threads = 1);

// Plug-in asymptotic variance of each configured analysis, evaluated at
// theta0 on one cohort of size asym_n and rescaled to cohort size config.n.
std::vector<double> asymptotic_variances(const StudyConfig& config, std::size_t large_n);

struct EfficiencyRow {
  double fraction = 0.0;
  RhoKind weight = RhoKind::gehan;
  Method method = Method::full;
  double asym_var = 0.0;
  double rel_eff = 0.0;  // full-data logrank variance / asym_var
};

std::vector<EfficiencyRow> efficiency_curve(const StudyConfig& config, const std::vector<double>& fractions,
                                            std::size_t large_n = 200000);

}  // namespace aftcc
