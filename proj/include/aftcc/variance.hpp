// Plug-in sandwich variance for the weighted rank estimator, and the
// reduction obtained when sampling fractions are estimated.
//
// The influence contribution of subject i is
//
//   c_i = Omega_i rho(e_i) (z_i - eta(e_i)) delta_i
//         - W_i sum_{t_k <= e_i} rho(t_k) (z_i - eta(t_k)) dLambda(t_k)
//
// with dLambda the weighted Nelson-Aalen increments on the residual scale.
// The variance of theta_hat is D^{-1} A D^{-T} / n with A the second moment
// of c and D a central-difference slope of Psi. With estimated fractions it
// is reduced by D^{-1} B V0 B' D^{-T} / n.
#pragma once

#include "aftcc/data_model.hpp"
#include "aftcc/estimating_function.hpp"
#include "aftcc/solver.hpp"
#include "aftcc/weight_schemes.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aftcc {

struct HazardEstimate {
  std::vector<double> times;  // event residuals (tie groups), ascending
  std::vector<double> increments;
  std::vector<double> cumulative;
  std::size_t dropped = 0;  // event groups with an empty risk set
  Vector theta;             // parameter the residuals were computed at
};

HazardEstimate cum_hazard_hat(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                              const Vector& theta_hat, const ValidationPolicy& policy = {});

struct InfluenceTerms {
  Matrix term1;  // n x d
  Matrix term2;  // n x d
  Matrix contributions() const { return term1 - term2; }
};

InfluenceTerms influence_contributions(const Cohort& cohort, std::span<const double> omega,
                                       std::span<const double> w, const Vector& theta_hat, RhoKind rho,
                                       const HazardEstimate& hazard, const ValidationPolicy& policy = {});

struct SlopeEstimate {
  Matrix slope;
  Vector steps;
  bool plateau_warning = false;  // some column came out exactly zero
};

// Column j = [Psi(theta + h_j e_j) - Psi(theta - h_j e_j)] / (2 h_j) with
// h_j = step_scale * scale_j / sqrt(n), scale_j a robust spread of covariate j.
SlopeEstimate slope_matrix(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                           const Vector& theta_hat, RhoKind rho, double step_scale = 1.0,
                           const ValidationPolicy& policy = {});

// Central differences with explicit per-coordinate steps.
SlopeEstimate slope_matrix_at_steps(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                                    const Vector& theta_hat, RhoKind rho, const Vector& steps,
                                    const ValidationPolicy& policy = {});

// How estimate_variance chooses the difference steps:
//   covariate  h_j = step_scale * robust spread of z_j / sqrt(n)
//   estimator  h_j = step_scale * pilot standard error of theta_j, the pilot
//              being the covariate-rule sandwich (a secant across the
//              estimator's own sampling noise)
enum class StepRule { covariate, estimator };

StepRule parse_step_rule(const std::string& name);
std::string to_string(StepRule r);

struct VarianceReport {
  Matrix slope;
  Matrix meat;
  Matrix sigma0;
  std::optional<Matrix> sigma_star;
  std::optional<Matrix> b_hat;
  std::optional<Matrix> v0;
  double condition_number = 0.0;
  std::size_t n = 0;
  bool plateau_warning = false;

  // sigma_star when available, else sigma0.
  const Matrix& variance() const { return sigma_star ? *sigma_star : sigma0; }
};

VarianceReport sandwich_variance(const Matrix& contributions, const Matrix& slope);

// d x S matrix B for the estimated-fraction correction.
Matrix correction_matrix_b(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                           const Vector& theta_hat, RhoKind rho, Scheme scheme,
                           const std::optional<AlphaEstimate>& alpha_estimate, const ValidationPolicy& policy = {});

VarianceReport corrected_variance(VarianceReport report, const Matrix& b_hat, const Matrix& v0);

// Wald intervals theta_j +- q sqrt(variance_jj).
std::vector<Interval> confidence_interval(const Vector& theta_hat, const VarianceReport& report, double level);

// Full pipeline at theta: hazard, influence terms, slope, sandwich and, when
// the weights carry an alpha estimate, the corrected variance.
VarianceReport estimate_variance(const Cohort& cohort, const Weights& weights, Scheme scheme, const Vector& theta,
                                 RhoKind rho, double step_scale = 1.0, const ValidationPolicy& policy = {},
                                 StepRule rule = StepRule::covariate);

}  // namespace aftcc
