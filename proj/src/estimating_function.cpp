#include "aftcc/estimating_function.hpp"

#include <algorithm>
#include <numeric>

namespace aftcc {

RhoKind parse_rho(const std::string& name) {
  if (name == "logrank") return RhoKind::logrank;
  if (name == "gehan") return RhoKind::gehan;
  fail(ErrorKind::validation, "unknown weight function '" + name + "' (expected logrank or gehan)");
}

std::string to_string(RhoKind r) { return r == RhoKind::gehan ? "gehan" : "logrank"; }

bool event_term_used(const RiskSetStats& stats, double residual, const ValidationPolicy& policy) noexcept {
  if (policy.tau && residual > *policy.tau) return false;
  const std::size_t k = stats.group_at(residual);
  return k < stats.num_groups() && stats.d0[k] >= policy.min_risk_weight;
}

PsiValue psi_from_stats(const Cohort& cohort, std::span<const double> omega, std::span<const double> residuals,
                        const RiskSetStats& stats, RhoKind rho, const ValidationPolicy& policy) {
  PsiValue out;
  out.psi = Vector::Zero(cohort.dim());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const Subject& s = cohort[i];
    if (s.delta == 0 || omega[i] <= 0.0) continue;
    if (!event_term_used(stats, residuals[i], policy)) {
      ++out.n_dropped;
      continue;
    }
    ++out.n_event_terms;
    const std::size_t g = stats.group_of[i];
    if (rho == RhoKind::gehan)
      out.psi += (omega[i] / stats.sum_w) * stats.scaled_gap(s.z, g);
    else
      out.psi += omega[i] * stats.gap(s.z, g);
  }
  out.psi /= static_cast<double>(cohort.size());
  return out;
}

PsiValue psi(const Cohort& cohort, std::span<const double> omega, std::span<const double> w, const Vector& theta,
             RhoKind rho, const ValidationPolicy& policy) {
  check_weights(cohort, omega, w);
  const std::vector<double> res = compute_residuals(cohort, theta, omega, w);
  const RiskSetStats st = risk_stats_from_residuals(cohort, w, res);
  return psi_from_stats(cohort, omega, res, st, rho, policy);
}

Vector psi_pairwise_oracle(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                           const Vector& theta) {
  check_weights(cohort, omega, w);
  const std::vector<double> res = compute_residuals(cohort, theta, omega, w);
  Vector acc = Vector::Zero(cohort.dim());
  double total_w = 0.0;
  for (double v : w) total_w += v;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    if (cohort[i].delta == 0 || omega[i] <= 0.0) continue;
    for (std::size_t j = 0; j < cohort.size(); ++j) {
      if (w[j] > 0.0 && res[j] >= res[i]) acc += omega[i] * w[j] * (cohort[i].z - cohort[j].z);
    }
  }
  return acc / (static_cast<double>(cohort.size()) * total_w);
}

double gehan_loss(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                  const Vector& theta) {
  check_weights(cohort, omega, w);
  const std::vector<double> res = compute_residuals(cohort, theta, omega, w);
  const std::size_t n = cohort.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return res[a] < res[b]; });

  // Walk from the largest residual down, keeping sums of W and W*e over
  // subjects with residual >= the current one. Equal residuals contribute
  // zero hinge, so tie handling does not matter here.
  double sum_w = 0.0, sum_we = 0.0, total = 0.0;
  for (std::size_t r = n; r-- > 0;) {
    const std::size_t i = order[r];
    sum_w += w[i];
    sum_we += w[i] * res[i];
    if (cohort[i].delta == 1 && omega[i] > 0.0) total += omega[i] * (sum_we - res[i] * sum_w);
  }
  return total / (static_cast<double>(n) * sum_w);
}

PsiValue psi_star(const Cohort& cohort, const WeightPlan& plan, const Vector& theta, RhoKind rho,
                  const ValidationPolicy& policy) {
  if (plan.scheme != Scheme::full_data && plan.alpha_source != AlphaSource::estimated_fractions)
    fail(ErrorKind::validation, "psi_star requires a plan with estimated sampling fractions");
  const Weights wt = assign_weights(cohort, plan);
  return psi(cohort, wt.omega, wt.w, theta, rho, policy);
}

}  // namespace aftcc
