#include "aftcc/risk_set.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace aftcc {

void check_weights(const Cohort& cohort, std::span<const double> omega, std::span<const double> w) {
  if (w.size() != cohort.size() || (!omega.empty() && omega.size() != cohort.size()))
    fail(ErrorKind::validation, "weight array length does not match cohort size");
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::validation, "weights must be finite and nonnegative");
    total += v;
  }
  for (double v : omega)
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::validation, "weights must be finite and nonnegative");
  if (!(total > 0.0)) fail(ErrorKind::validation, "all W weights are zero");
}

std::vector<double> compute_residuals(const Cohort& cohort, const Vector& theta, std::span<const double> omega,
                                      std::span<const double> w) {
  if (theta.size() != cohort.dim())
    fail(ErrorKind::validation, "theta has length " + std::to_string(theta.size()) + ", expected " +
                                    std::to_string(cohort.dim()));
  const bool weighted = !w.empty();
  std::vector<double> res(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const Subject& s = cohort[i];
    const bool needed = !weighted || reads_covariates(s, omega.empty() ? 0.0 : omega[i], w[i]);
    if (!needed) {
      res[i] = s.y;
      continue;
    }
    if (s.observed == 0)
      fail(ErrorKind::validation, "subject " + std::to_string(i) + ": unobserved covariates are required");
    res[i] = s.y - s.z.dot(theta);
  }
  return res;
}

std::size_t RiskSetStats::group_at(double t) const noexcept {
  return static_cast<std::size_t>(std::lower_bound(sorted_residuals.begin(), sorted_residuals.end(), t) -
                                  sorted_residuals.begin());
}

double RiskSetStats::d0_at(double t) const noexcept {
  const std::size_t k = group_at(t);
  return k < num_groups() ? d0[k] : 0.0;
}

Vector RiskSetStats::d1_at(double t) const {
  const std::size_t k = group_at(t);
  if (k < num_groups()) return d1.col(static_cast<Eigen::Index>(k));
  return Vector::Zero(d1.rows());
}

Vector RiskSetStats::gap(const Vector& z, std::size_t g) const {
  return (z - center) - d1c.col(static_cast<Eigen::Index>(g)) / d0[g];
}

Vector RiskSetStats::scaled_gap(const Vector& z, std::size_t g) const {
  return (z - center) * d0[g] - d1c.col(static_cast<Eigen::Index>(g));
}

RiskSetStats risk_stats_from_residuals(const Cohort& cohort, std::span<const double> w,
                                       std::span<const double> residuals) {
  const std::size_t n = cohort.size();
  if (residuals.size() != n) fail(ErrorKind::validation, "residual array length does not match cohort size");
  check_weights(cohort, {}, w);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return residuals[a] < residuals[b]; });

  RiskSetStats st;
  st.n = n;
  st.group_of.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double v = residuals[order[r]];
    if (st.sorted_residuals.empty() || v != st.sorted_residuals.back()) st.sorted_residuals.push_back(v);
    st.group_of[order[r]] = st.sorted_residuals.size() - 1;
  }

  const std::size_t groups = st.num_groups();
  const Eigen::Index dim = cohort.dim();
  const double inv_n = 1.0 / static_cast<double>(n);
  st.d0.assign(groups, 0.0);
  st.d1 = Matrix::Zero(dim, static_cast<Eigen::Index>(groups));
  st.d1c = Matrix::Zero(dim, static_cast<Eigen::Index>(groups));
  st.center = Vector::Zero(dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] > 0.0) {
      st.center = cohort[i].z;
      break;
    }
  }

  // Per-group totals, then suffix sums from the largest residual down.
  double total_w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] == 0.0) continue;
    const std::size_t g = st.group_of[i];
    st.d0[g] += w[i];
    st.d1.col(static_cast<Eigen::Index>(g)) += w[i] * cohort[i].z;
    st.d1c.col(static_cast<Eigen::Index>(g)) += w[i] * (cohort[i].z - st.center);
    total_w += w[i];
  }
  for (std::size_t g = groups - 1; g-- > 0;) {
    st.d0[g] += st.d0[g + 1];
    st.d1.col(static_cast<Eigen::Index>(g)) += st.d1.col(static_cast<Eigen::Index>(g + 1));
    st.d1c.col(static_cast<Eigen::Index>(g)) += st.d1c.col(static_cast<Eigen::Index>(g + 1));
  }
  for (double& v : st.d0) v *= inv_n;
  st.d1 *= inv_n;
  st.d1c *= inv_n;
  st.sum_w = total_w * inv_n;
  return st;
}

RiskSetStats risk_stats(const Cohort& cohort, std::span<const double> w, const Vector& theta) {
  check_weights(cohort, {}, w);
  const std::vector<double> res = compute_residuals(cohort, theta, {}, w);
  return risk_stats_from_residuals(cohort, w, res);
}

Vector eta_hat(const RiskSetStats& stats, double t, double min_risk_weight) {
  const std::size_t k = stats.group_at(t);
  if (k >= stats.num_groups() || stats.d0[k] < min_risk_weight)
    fail(ErrorKind::numeric, "empty risk set at t = " + std::to_string(t));
  return stats.center + stats.d1c.col(static_cast<Eigen::Index>(k)) / stats.d0[k];
}

double rho_hat(const RiskSetStats& stats, double t) noexcept { return stats.d0_at(t) / stats.sum_w; }

std::pair<double, Vector> brute_force_risk_stats(const Cohort& cohort, std::span<const double> w,
                                                 const Vector& theta, double t) {
  check_weights(cohort, {}, w);
  const std::vector<double> res = compute_residuals(cohort, theta, {}, w);
  double d0 = 0.0;
  Vector d1 = Vector::Zero(cohort.dim());
  for (std::size_t j = 0; j < cohort.size(); ++j) {
    if (w[j] > 0.0 && res[j] >= t) {
      d0 += w[j];
      d1 += w[j] * cohort[j].z;
    }
  }
  const double n = static_cast<double>(cohort.size());
  return {d0 / n, d1 / n};
}

}  // namespace aftcc
