#include "aftcc/sim_study.hpp"

#include "aftcc/rng.hpp"
#include "aftcc/variance.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace aftcc {

namespace {

constexpr std::uint64_t kAsymptoticStream = ~std::uint64_t{0};
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool in_open_unit(double p) { return p > 0.0 && p < 1.0; }

}  // namespace

ErrorDist parse_error_dist(const std::string& name) {
  if (name == "normal") return ErrorDist::normal;
  if (name == "logistic") return ErrorDist::logistic;
  if (name == "extreme_value") return ErrorDist::extreme_value;
  fail(ErrorKind::validation, "error_dist: unknown value '" + name + "'");
}

std::string to_string(ErrorDist e) {
  switch (e) {
    case ErrorDist::normal: return "normal";
    case ErrorDist::logistic: return "logistic";
    case ErrorDist::extreme_value: return "extreme_value";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "full" || name == "1") return Method::full;
  if (name == "pred_true" || name == "2") return Method::pred_true;
  if (name == "pred_est" || name == "3") return Method::pred_est;
  if (name == "nonpred_true" || name == "4") return Method::nonpred_true;
  if (name == "nonpred_est" || name == "5") return Method::nonpred_est;
  fail(ErrorKind::validation, "methods: unknown method '" + name + "'");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::full: return "full";
    case Method::pred_true: return "pred_true";
    case Method::pred_est: return "pred_est";
    case Method::nonpred_true: return "nonpred_true";
    case Method::nonpred_est: return "nonpred_est";
  }
  return "?";
}

WeightPlan plan_for(Method m) {
  switch (m) {
    case Method::full: return {Scheme::full_data, AlphaSource::true_pi, {}};
    case Method::pred_true: return {Scheme::case_cohort_predictable, AlphaSource::true_pi, {}};
    case Method::pred_est: return {Scheme::case_cohort_predictable, AlphaSource::estimated_fractions, {0, 1}};
    case Method::nonpred_true: return {Scheme::case_cohort_nonpredictable, AlphaSource::true_pi, {}};
    case Method::nonpred_est: return {Scheme::case_cohort_nonpredictable, AlphaSource::estimated_fractions, {0, 1}};
  }
  return {};
}

std::vector<MethodSpec> all_methods() {
  std::vector<MethodSpec> out;
  for (RhoKind rho : {RhoKind::logrank, RhoKind::gehan})
    for (int m = 1; m <= 5; ++m) out.push_back({static_cast<Method>(m), rho});
  return out;
}

void check_config(const StudyConfig& c) {
  if (!in_open_unit(c.cov_prob)) fail(ErrorKind::validation, "cov_prob must lie in (0, 1)");
  if (!in_open_unit(c.zstar_sensitivity)) fail(ErrorKind::validation, "zstar_sensitivity must lie in (0, 1)");
  if (!in_open_unit(c.zstar_specificity)) fail(ErrorKind::validation, "zstar_specificity must lie in (0, 1)");
  if (!in_open_unit(c.target_censoring)) fail(ErrorKind::validation, "target_censoring must lie in (0, 1)");
  if (!(c.censor_lower_quantile > 0.0 && c.censor_lower_quantile < 0.5))
    fail(ErrorKind::validation, "censor_lower_quantile must lie in (0, 0.5)");
  if (!(c.subcohort_fraction > 0.0 && c.subcohort_fraction <= 1.0))
    fail(ErrorKind::validation, "subcohort_fraction must lie in (0, 1]");
  if (c.n < 10) fail(ErrorKind::validation, "n must be at least 10");
  if (c.replications < 1) fail(ErrorKind::validation, "replications must be at least 1");
  if (c.methods.empty()) fail(ErrorKind::validation, "methods must not be empty");
  if (!in_open_unit(c.level)) fail(ErrorKind::validation, "level must lie in (0, 1)");
  if (!(c.step_scale > 0.0)) fail(ErrorKind::validation, "step_scale must be positive");
  if (!std::isfinite(c.theta0)) fail(ErrorKind::validation, "theta0 must be finite");
}

double error_quantile(ErrorDist dist, double p) {
  switch (dist) {
    case ErrorDist::normal: return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
    case ErrorDist::logistic: return std::log(p / (1.0 - p));
    case ErrorDist::extreme_value: return std::log(-std::log1p(-p));
  }
  return kNaN;
}

double error_survival(ErrorDist dist, double t) {
  switch (dist) {
    case ErrorDist::normal: return 0.5 * std::erfc(t / std::sqrt(2.0));
    case ErrorDist::logistic: return 1.0 / (1.0 + std::exp(t));
    case ErrorDist::extreme_value: return std::exp(-std::exp(t));
  }
  return kNaN;
}

double censoring_rate(ErrorDist dist, const CensoringWindow& window) {
  if (window.b <= window.a) return error_survival(dist, window.a);
  auto surv = [dist](double c) { return error_survival(dist, c); };
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(surv, window.a, window.b, 15, 1e-13);
  return integral / (window.b - window.a);
}

CensoringWindow calibrate_censoring(ErrorDist dist, double target, double lower_quantile) {
  if (!(target > 0.0 && target < 1.0)) fail(ErrorKind::validation, "target_censoring must lie in (0, 1)");
  if (!(lower_quantile > 0.0 && lower_quantile < 0.5))
    fail(ErrorKind::validation, "censor_lower_quantile must lie in (0, 0.5)");
  CensoringWindow w{error_quantile(dist, lower_quantile), 0.0};
  const double at_a = error_survival(dist, w.a);  // rate as b -> a
  if (target >= at_a - 1e-4) {
    w.b = w.a;
    return w;
  }
  constexpr double kMaxWidth = 1000.0;
  double lo = w.a, hi = w.a + kMaxWidth;
  if (censoring_rate(dist, {w.a, hi}) > target)
    fail(ErrorKind::validation, "target censoring rate unreachable within the search window");
  // The rate decreases in b.
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (censoring_rate(dist, {w.a, mid}) > target ? lo : hi) = mid;
  }
  w.b = 0.5 * (lo + hi);
  return w;
}

AllocationProbs allocation_probs(double cov_prob, double sens, double spec, double f) {
  if (!(f > 0.0 && f <= 1.0)) fail(ErrorKind::validation, "subcohort fraction must lie in (0, 1]");
  const double p1 = sens * cov_prob + (1.0 - spec) * (1.0 - cov_prob);
  const double p0 = 1.0 - p1;
  AllocationProbs out{f / (2.0 * p0), f / (2.0 * p1)};
  if (out.pi1 > 1.0) {
    out.pi1 = 1.0;
    out.pi0 = (f - p1) / p0;
  } else if (out.pi0 > 1.0) {
    out.pi0 = 1.0;
    out.pi1 = (f - p0) / p1;
  }
  out.pi0 = std::min(out.pi0, 1.0);
  out.pi1 = std::min(out.pi1, 1.0);
  return out;
}

Cohort generate_cohort(const StudyConfig& config, const CensoringWindow& window, std::uint64_t replicate_index,
                       std::optional<std::size_t> size) {
  const std::size_t n = size.value_or(config.n);
  const AllocationProbs pis = allocation_probs(config.cov_prob, config.zstar_sensitivity, config.zstar_specificity,
                                               config.subcohort_fraction);
  CounterRng rng(config.master_seed, replicate_index);
  std::vector<Subject> subjects(n);
  for (Subject& s : subjects) {
    // Fixed draw order per subject; the subcohort draw comes last so that
    // changing the fraction leaves everything else unchanged.
    const double u_z = rng.uniform(), u_e = rng.uniform(), u_c = rng.uniform();
    const double u_star = rng.uniform(), u_sc = rng.uniform();
    const int z = u_z < config.cov_prob ? 1 : 0;
    const double t = config.theta0 * z + error_quantile(config.error_dist, u_e);
    const double c = window.a + (window.b - window.a) * u_c;
    const int zstar = z == 1 ? (u_star < config.zstar_sensitivity ? 1 : 0) : (u_star < config.zstar_specificity ? 0 : 1);
    const double pi = zstar == 1 ? pis.pi1 : pis.pi0;
    s.delta = t <= c ? 1 : 0;
    s.y = std::min(t, c);
    s.z = Vector::Constant(1, static_cast<double>(z));
    s.stratum = zstar;
    s.in_subcohort = u_sc < pi ? 1 : 0;
    s.pi = pi;
    s.observed = (s.delta == 1 || s.in_subcohort == 1) ? 1 : 0;
  }
  return Cohort(std::move(subjects), 1);
}

Cohort generate_cohort(const StudyConfig& config, std::uint64_t replicate_index) {
  return generate_cohort(config, calibrate_censoring(config.error_dist, config.target_censoring, config.censor_lower_quantile), replicate_index);
}

Cohort complete_cohort(const Cohort& cohort) {
  std::vector<Subject> subjects = cohort.subjects();
  for (Subject& s : subjects) s.observed = 1;
  return Cohort(std::move(subjects), cohort.dim());
}

ReplicateResult run_replicate(const Cohort& cohort, Method method, RhoKind rho, const StudyConfig& config,
                              std::optional<Vector> seed_theta) {
  ReplicateResult out;
  try {
    const Cohort full = method == Method::full ? complete_cohort(cohort) : Cohort();
    const Cohort& data = method == Method::full ? full : cohort;
    const WeightPlan plan = plan_for(method);
    const Weights wt = assign_weights(data, plan);
    const SolveOptions options;
    const FitResult fit = rho == RhoKind::gehan ? solve_gehan(data, wt.omega, wt.w, options)
                                                : solve_logrank(data, wt.omega, wt.w, options, seed_theta);
    const VarianceReport rep =
        estimate_variance(data, wt, plan.scheme, fit.theta_hat, rho, config.step_scale, options.policy,
                          config.slope_step);
    const Interval ci = confidence_interval(fit.theta_hat, rep, config.level).front();
    out.theta_hat = fit.theta_hat[0];
    out.variance = rep.variance()(0, 0);
    out.covers = ci.lo <= config.theta0 && config.theta0 <= ci.hi;
    if (fit.above_threshold) out.flags |= flag_above_threshold;
    if (fit.flat_region.front()) out.flags |= flag_flat_region;
    if (fit.possibly_nonunique) out.flags |= flag_nonunique;
    if (fit.degenerate) out.flags |= flag_degenerate;
    if (rep.plateau_warning) out.flags |= flag_plateau;
  } catch (const Error& e) {
    out.flags |= flag_failed;
    out.error = e.what();
  }
  return out;
}

const StudyRow& StudyReport::row(RhoKind weight, Method method) const {
  for (const StudyRow& r : rows)
    if (r.weight == weight && r.method == method) return r;
  fail(ErrorKind::validation, "no report row for " + to_string(weight) + "/" + to_string(method));
}

std::vector<std::vector<ReplicateResult>> run_replicates(const StudyConfig& config, unsigned threads) {
  check_config(config);
  const CensoringWindow window = calibrate_censoring(config.error_dist, config.target_censoring, config.censor_lower_quantile);
  const std::size_t reps = config.replications;
  std::vector<std::vector<ReplicateResult>> results(reps);

  // Gehan analyses run first so that logrank fits can start from them.
  std::vector<std::size_t> order;
  for (std::size_t m = 0; m < config.methods.size(); ++m)
    if (config.methods[m].rho == RhoKind::gehan) order.push_back(m);
  for (std::size_t m = 0; m < config.methods.size(); ++m)
    if (config.methods[m].rho == RhoKind::logrank) order.push_back(m);

  auto one = [&](std::size_t r) {
    const Cohort cohort = generate_cohort(config, window, r);
    std::vector<ReplicateResult> row(config.methods.size());
    std::vector<std::optional<Vector>> gehan_theta(6);
    for (std::size_t m : order) {
      const MethodSpec& spec = config.methods[m];
      const auto slot = static_cast<std::size_t>(spec.method);
      row[m] = run_replicate(cohort, spec.method, spec.rho, config,
                             spec.rho == RhoKind::logrank ? gehan_theta[slot] : std::nullopt);
      if (spec.rho == RhoKind::gehan && row[m].ok()) gehan_theta[slot] = Vector::Constant(1, row[m].theta_hat);
    }
    results[r] = std::move(row);
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(reps)));
  if (workers == 1) {
    for (std::size_t r = 0; r < reps; ++r) one(r);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (std::size_t r = next++; r < reps; r = next++) one(r);
    });
  for (std::thread& th : pool) th.join();
  return results;
}

StudyReport summarize(const StudyConfig& config, const std::vector<std::vector<ReplicateResult>>& results,
                      const std::vector<double>& asym_vars) {
  StudyReport report;
  for (std::size_t m = 0; m < config.methods.size(); ++m) {
    StudyRow row;
    row.alpha_fraction = config.subcohort_fraction;
    row.weight = config.methods[m].rho;
    row.method = config.methods[m].method;
    row.asym_var = m < asym_vars.size() ? asym_vars[m] : kNaN;
    double sum = 0.0, sum_var = 0.0, covered = 0.0;
    for (const auto& rep : results) {
      const ReplicateResult& r = rep[m];
      if (!r.ok()) {
        ++row.n_failed;
        continue;
      }
      ++row.n_ok;
      if (r.flags != 0) ++row.n_flagged;
      sum += r.theta_hat;
      sum_var += r.variance;
      covered += r.covers ? 1.0 : 0.0;
    }
    if (row.n_ok == 0) {
      row.bias = row.emp_var = row.ave_var = row.coverage = kNaN;
      report.rows.push_back(row);
      continue;
    }
    const double k = static_cast<double>(row.n_ok);
    const double mean = sum / k;
    double ss = 0.0;
    for (const auto& rep : results)
      if (rep[m].ok()) ss += (rep[m].theta_hat - mean) * (rep[m].theta_hat - mean);
    row.bias = mean - config.theta0;
    row.emp_var = row.n_ok > 1 ? ss / (k - 1.0) : 0.0;
    row.ave_var = sum_var / k;
    row.coverage = covered / k;
    report.rows.push_back(row);
  }
  return report;
}

std::vector<double> asymptotic_variances(const StudyConfig& config, std::size_t large_n) {
  check_config(config);
  const CensoringWindow window = calibrate_censoring(config.error_dist, config.target_censoring, config.censor_lower_quantile);
  const Cohort cohort = generate_cohort(config, window, kAsymptoticStream, large_n);
  const Cohort full = complete_cohort(cohort);
  const Vector theta0 = Vector::Constant(1, config.theta0);
  const double rescale = static_cast<double>(large_n) / static_cast<double>(config.n);
  std::vector<double> out;
  for (const MethodSpec& spec : config.methods) {
    const Cohort& data = spec.method == Method::full ? full : cohort;
    const WeightPlan plan = plan_for(spec.method);
    const Weights wt = assign_weights(data, plan);
    const VarianceReport rep = estimate_variance(data, wt, plan.scheme, theta0, spec.rho, config.step_scale, {}, config.slope_step);
    out.push_back(rep.variance()(0, 0) * rescale);
  }
  return out;
}

StudyReport run_study(const StudyConfig& config, unsigned threads) {
  const auto results = run_replicates(config, threads);
  std::vector<double> asym;
  if (config.asym_n > 0) asym = asymptotic_variances(config, config.asym_n);
  return summarize(config, results, asym);
}

std::vector<EfficiencyRow> efficiency_curve(const StudyConfig& config, const std::vector<double>& fractions,
                                            std::size_t large_n) {
  if (fractions.empty()) fail(ErrorKind::validation, "fraction grid is empty");
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) fail(ErrorKind::validation, "fraction grid values must lie in (0, 1]");
  if (large_n < 10) fail(ErrorKind::validation, "efficiency cohort size must be at least 10");

  StudyConfig cfg = config;
  const MethodSpec reference{Method::full, RhoKind::logrank};
  bool has_reference = false;
  for (const MethodSpec& m : cfg.methods) has_reference = has_reference || m == reference;
  if (!has_reference) cfg.methods.insert(cfg.methods.begin(), reference);

  std::vector<EfficiencyRow> out;
  for (double f : fractions) {
    cfg.subcohort_fraction = f;
    const std::vector<double> vars = asymptotic_variances(cfg, large_n);
    double ref = 0.0;
    for (std::size_t m = 0; m < cfg.methods.size(); ++m)
      if (cfg.methods[m] == reference) ref = vars[m];
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      if (!has_reference && cfg.methods[m] == reference) continue;
      out.push_back({f, cfg.methods[m].rho, cfg.methods[m].method, vars[m], ref / vars[m]});
    }
  }
  return out;
}

}  // namespace aftcc
