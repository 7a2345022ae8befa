#include "aftcc/variance.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>

namespace aftcc {

namespace {

double quantile7(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// IQR / 1.349, falling back to the standard deviation for covariates whose
// quartiles coincide.
double robust_scale(std::vector<double> v) {
  if (v.size() < 2) return 0.0;
  const double iqr = quantile7(v, 0.75) - quantile7(v, 0.25);
  if (iqr > 0.0) return iqr / 1.349;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

HazardEstimate cum_hazard_hat(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                              const Vector& theta_hat, const ValidationPolicy& policy) {
  check_weights(cohort, omega, w);
  if (cohort.num_events() == 0) fail(ErrorKind::validation, "no events");
  const std::vector<double> res = compute_residuals(cohort, theta_hat, omega, w);
  const RiskSetStats st = risk_stats_from_residuals(cohort, w, res);
  const double n = static_cast<double>(cohort.size());

  std::vector<double> mass(st.num_groups(), 0.0);
  std::vector<char> has_event(st.num_groups(), 0), dropped(st.num_groups(), 0);
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    if (cohort[i].delta == 0 || omega[i] <= 0.0) continue;
    const std::size_t g = st.group_of[i];
    has_event[g] = 1;
    if (!event_term_used(st, res[i], policy)) {
      dropped[g] = 1;
      continue;
    }
    mass[g] += omega[i];
  }

  HazardEstimate h;
  h.theta = theta_hat;
  double cum = 0.0;
  for (std::size_t g = 0; g < st.num_groups(); ++g) {
    if (!has_event[g]) continue;
    if (dropped[g]) {
      ++h.dropped;
      continue;
    }
    const double inc = mass[g] / (n * st.d0[g]);
    cum += inc;
    h.times.push_back(st.sorted_residuals[g]);
    h.increments.push_back(inc);
    h.cumulative.push_back(cum);
  }
  if (h.times.empty()) fail(ErrorKind::numeric, "no usable events for the hazard estimate");
  return h;
}

InfluenceTerms influence_contributions(const Cohort& cohort, std::span<const double> omega,
                                       std::span<const double> w, const Vector& theta_hat, RhoKind rho,
                                       const HazardEstimate& hazard, const ValidationPolicy& policy) {
  if (hazard.theta.size() != theta_hat.size() || hazard.theta != theta_hat)
    fail(ErrorKind::validation, "hazard estimate was computed at a different theta");
  check_weights(cohort, omega, w);
  const std::vector<double> res = compute_residuals(cohort, theta_hat, omega, w);
  const RiskSetStats st = risk_stats_from_residuals(cohort, w, res);
  const std::size_t n = cohort.size();
  const Eigen::Index d = cohort.dim();

  // Prefix sums over hazard jump points of rho dLambda and rho eta dLambda.
  const std::size_t m = hazard.times.size();
  std::vector<double> cum_rho(m + 1, 0.0);
  Matrix cum_rho_eta = Matrix::Zero(d, static_cast<Eigen::Index>(m + 1));
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t g = st.group_at(hazard.times[k]);
    const double d0 = st.d0[g];
    const double rho_k = rho == RhoKind::gehan ? d0 / st.sum_w : 1.0;
    const auto gi = static_cast<Eigen::Index>(g);
    const auto ki = static_cast<Eigen::Index>(k);
    cum_rho[k + 1] = cum_rho[k] + rho_k * hazard.increments[k];
    cum_rho_eta.col(ki + 1) = cum_rho_eta.col(ki) + (rho_k * hazard.increments[k] / d0) * st.d1c.col(gi);
  }

  InfluenceTerms out{Matrix::Zero(static_cast<Eigen::Index>(n), d), Matrix::Zero(static_cast<Eigen::Index>(n), d)};
  for (std::size_t i = 0; i < n; ++i) {
    const Subject& s = cohort[i];
    const auto ii = static_cast<Eigen::Index>(i);
    if (s.delta == 1 && omega[i] > 0.0 && event_term_used(st, res[i], policy)) {
      const std::size_t g = st.group_of[i];
      if (rho == RhoKind::gehan)
        out.term1.row(ii) = ((omega[i] / st.sum_w) * st.scaled_gap(s.z, g)).transpose();
      else
        out.term1.row(ii) = (omega[i] * st.gap(s.z, g)).transpose();
    }
    if (w[i] > 0.0) {
      const auto k = static_cast<std::size_t>(
          std::upper_bound(hazard.times.begin(), hazard.times.end(), res[i]) - hazard.times.begin());
      out.term2.row(ii) = (w[i] * ((s.z - st.center) * cum_rho[k] - cum_rho_eta.col(static_cast<Eigen::Index>(k)))).transpose();
    }
  }
  return out;
}

SlopeEstimate slope_matrix(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                           const Vector& theta_hat, RhoKind rho, double step_scale,
                           const ValidationPolicy& policy) {
  if (!(step_scale > 0.0)) fail(ErrorKind::validation, "step_scale must be positive");
  check_weights(cohort, omega, w);
  const Eigen::Index d = cohort.dim();
  const double root_n = std::sqrt(static_cast<double>(cohort.size()));

  Vector steps(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    std::vector<double> zj;
    for (std::size_t i = 0; i < cohort.size(); ++i)
      if (reads_covariates(cohort[i], omega[i], w[i])) zj.push_back(cohort[i].z[j]);
    steps[j] = step_scale * robust_scale(std::move(zj)) / root_n;
    if (!(steps[j] > 0.0)) fail(ErrorKind::numeric, "zero covariate spread for coordinate " + std::to_string(j));
  }
  return slope_matrix_at_steps(cohort, omega, w, theta_hat, rho, steps, policy);
}

SlopeEstimate slope_matrix_at_steps(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                                    const Vector& theta_hat, RhoKind rho, const Vector& steps,
                                    const ValidationPolicy& policy) {
  check_weights(cohort, omega, w);
  const Eigen::Index d = cohort.dim();
  if (steps.size() != d || theta_hat.size() != d) fail(ErrorKind::validation, "step dimension mismatch");
  SlopeEstimate out;
  out.slope = Matrix::Zero(d, d);
  out.steps = steps;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double h = steps[j];
    if (!(h > 0.0 && std::isfinite(h))) fail(ErrorKind::numeric, "nonpositive difference step for coordinate " + std::to_string(j));
    const Vector up = psi(cohort, omega, w, Vector(theta_hat + h * Vector::Unit(d, j)), rho, policy).psi;
    const Vector down = psi(cohort, omega, w, Vector(theta_hat - h * Vector::Unit(d, j)), rho, policy).psi;
    out.slope.col(j) = (up - down) / (2.0 * h);
    if (out.slope.col(j).isZero(0.0)) out.plateau_warning = true;
  }
  return out;
}

VarianceReport sandwich_variance(const Matrix& contributions, const Matrix& slope) {
  const Eigen::Index d = slope.rows();
  if (slope.cols() != d || contributions.cols() != d)
    fail(ErrorKind::validation, "slope and contribution dimensions disagree");
  if (contributions.rows() == 0) fail(ErrorKind::validation, "no influence contributions");
  const Eigen::FullPivLU<Matrix> lu(slope);
  if (!lu.isInvertible()) fail(ErrorKind::numeric, "slope matrix is singular");

  VarianceReport rep;
  rep.n = static_cast<std::size_t>(contributions.rows());
  const double n = static_cast<double>(rep.n);
  rep.slope = slope;
  rep.meat = contributions.transpose() * contributions / n;
  const Eigen::JacobiSVD<Matrix> svd(slope);
  const Vector sv = svd.singularValues();
  rep.condition_number = sv[0] / sv[sv.size() - 1];
  const Matrix inv = lu.inverse();
  const Matrix s = inv * rep.meat * inv.transpose() / n;
  rep.sigma0 = 0.5 * (s + s.transpose());
  return rep;
}

Matrix correction_matrix_b(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                           const Vector& theta_hat, RhoKind rho, Scheme scheme,
                           const std::optional<AlphaEstimate>& alpha_estimate, const ValidationPolicy& policy) {
  if (!alpha_estimate) fail(ErrorKind::validation, "correction needs an alpha estimate");
  const AlphaEstimate& est = *alpha_estimate;
  const auto S = static_cast<Eigen::Index>(est.num_strata());
  const Eigen::Index d = cohort.dim();
  const std::size_t n = cohort.size();
  if (scheme == Scheme::full_data) return Matrix::Zero(d, S);

  check_weights(cohort, omega, w);
  const std::vector<double> res = compute_residuals(cohort, theta_hat, omega, w);
  const RiskSetStats st = risk_stats_from_residuals(cohort, w, res);
  const std::size_t groups = st.num_groups();

  // Suffix sums of Wdot and z Wdot' per tie group, on the 1/n scale.
  std::vector<Vector> wdot(n);
  Matrix u0 = Matrix::Zero(S, static_cast<Eigen::Index>(groups));
  std::vector<Matrix> u1(groups, Matrix::Zero(d, S));
  for (std::size_t i = 0; i < n; ++i) {
    wdot[i] = w_alpha_derivative(cohort[i], est, est.alpha_hat, scheme);
    if (wdot[i].isZero(0.0)) continue;
    const std::size_t g = st.group_of[i];
    u0.col(static_cast<Eigen::Index>(g)) += wdot[i];
    u1[g] += cohort[i].z * wdot[i].transpose();
  }
  for (std::size_t g = groups - 1; g-- > 0;) {
    u0.col(static_cast<Eigen::Index>(g)) += u0.col(static_cast<Eigen::Index>(g + 1));
    u1[g] += u1[g + 1];
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  const bool omega_moves = omega_follows_w(scheme);
  Matrix first = Matrix::Zero(d, S), second = Matrix::Zero(d, S);
  for (std::size_t i = 0; i < n; ++i) {
    const Subject& s = cohort[i];
    if (s.delta == 0 || omega[i] <= 0.0 || !event_term_used(st, res[i], policy)) continue;
    const std::size_t g = st.group_of[i];
    const auto gi = static_cast<Eigen::Index>(g);
    const double d0 = st.d0[g];
    const Vector eta = st.center + st.d1c.col(gi) / d0;
    // rho(t) A2(t): the Gehan rho cancels the A2 denominator; for logrank the
    // denominator is the weighted at-risk fraction D0(t).
    const Matrix core = (u1[g] - eta * u0.col(gi).transpose()) * inv_n;
    const double rho_i = rho == RhoKind::gehan ? d0 / st.sum_w : 1.0;
    first += omega[i] * (rho == RhoKind::gehan ? core : Matrix(core / d0));
    if (omega_moves && !wdot[i].isZero(0.0)) second += rho_i * (s.z - eta) * wdot[i].transpose();
  }
  return (first - second) * inv_n;
}

VarianceReport corrected_variance(VarianceReport report, const Matrix& b_hat, const Matrix& v0) {
  const Eigen::Index d = report.sigma0.rows();
  if (b_hat.rows() != d || b_hat.cols() != v0.rows() || v0.rows() != v0.cols())
    fail(ErrorKind::validation, "correction matrix dimensions disagree");
  const Matrix inv = Eigen::FullPivLU<Matrix>(report.slope).inverse();
  const Matrix corr = inv * b_hat * v0 * b_hat.transpose() * inv.transpose() / static_cast<double>(report.n);
  Matrix star = report.sigma0 - 0.5 * (corr + corr.transpose());
  star = 0.5 * (star + star.transpose());

  const Eigen::SelfAdjointEigenSolver<Matrix> eig(star);
  const double scale = std::max(1.0, report.sigma0.cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
    fail(ErrorKind::numeric, "estimated-fraction correction exceeds the sandwich variance");

  report.sigma_star = star;
  report.b_hat = b_hat;
  report.v0 = v0;
  return report;
}

std::vector<Interval> confidence_interval(const Vector& theta_hat, const VarianceReport& report, double level) {
  if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::validation, "confidence level must lie in (0, 1)");
  const Matrix& v = report.variance();
  if (v.rows() != theta_hat.size()) fail(ErrorKind::validation, "variance and theta dimensions disagree");
  const double q = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
  std::vector<Interval> out;
  for (Eigen::Index j = 0; j < theta_hat.size(); ++j) {
    if (v(j, j) < 0.0) fail(ErrorKind::numeric, "negative variance estimate");
    const double half = q * std::sqrt(v(j, j));
    out.push_back({theta_hat[j] - half, theta_hat[j] + half});
  }
  return out;
}

StepRule parse_step_rule(const std::string& name) {
  if (name == "covariate") return StepRule::covariate;
  if (name == "estimator") return StepRule::estimator;
  fail(ErrorKind::validation, "slope_step: unknown value '" + name + "'");
}

std::string to_string(StepRule r) { return r == StepRule::covariate ? "covariate" : "estimator"; }

VarianceReport estimate_variance(const Cohort& cohort, const Weights& weights, Scheme scheme, const Vector& theta,
                                 RhoKind rho, double step_scale, const ValidationPolicy& policy, StepRule rule) {
  const HazardEstimate hz = cum_hazard_hat(cohort, weights.omega, weights.w, theta, policy);
  const InfluenceTerms inf = influence_contributions(cohort, weights.omega, weights.w, theta, rho, hz, policy);
  const Matrix contrib = inf.contributions();
  SlopeEstimate sl = slope_matrix(cohort, weights.omega, weights.w, theta, rho,
                                  rule == StepRule::covariate ? step_scale : 1.0, policy);
  VarianceReport rep = sandwich_variance(contrib, sl.slope);
  if (rule == StepRule::estimator) {
    const Vector steps = step_scale * rep.sigma0.diagonal().cwiseSqrt();
    sl = slope_matrix_at_steps(cohort, weights.omega, weights.w, theta, rho, steps, policy);
    rep = sandwich_variance(contrib, sl.slope);
  }
  rep.plateau_warning = sl.plateau_warning;
  if (weights.alpha) {
    const Matrix b = correction_matrix_b(cohort, weights.omega, weights.w, theta, rho, scheme, weights.alpha, policy);
    rep = corrected_variance(std::move(rep), b, v0_hat(*weights.alpha));
  }
  return rep;
}

}  // namespace aftcc
