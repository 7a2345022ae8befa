// Weighted at-risk statistics on the residual scale.
//
// For residuals e_j = y_j - theta'z_j and weights W_j,
//   D0(t) = (1/n) sum_j W_j 1(e_j >= t)
//   D1(t) = (1/n) sum_j W_j 1(e_j >= t) z_j
// and the derived functions eta(t) = D1(t)/D0(t), rho(t) = D0(t)/(sum W / n).
// Ties are inclusive: every subject whose residual equals t is at risk at t.
#pragma once

#include "aftcc/data_model.hpp"

#include <span>
#include <utility>
#include <vector>

namespace aftcc {

struct RiskSetStats {
  std::vector<double> sorted_residuals;  // distinct residual values, ascending
  std::vector<double> d0;                // one value per tie group
  Matrix d1;                             // dim x groups
  Vector center;                         // covariate origin for d1c
  Matrix d1c;                            // d1 - center * d0
  double sum_w = 0.0;                    // sum W / n
  std::size_t n = 0;
  std::vector<std::size_t> group_of;     // subject index -> tie group

  std::size_t num_groups() const noexcept { return sorted_residuals.size(); }
  // First tie group whose residual is >= t; num_groups() when t exceeds all.
  std::size_t group_at(double t) const noexcept;
  double d0_at(double t) const noexcept;
  Vector d1_at(double t) const;
  // z - D1/D0 at group g, exact zero when every covariate equals z.
  Vector gap(const Vector& z, std::size_t g) const;
  // z * D0 - D1 at group g, computed from centred sums.
  Vector scaled_gap(const Vector& z, std::size_t g) const;
};

// True when subject i's covariates enter a computation with these weights.
inline bool reads_covariates(const Subject& s, double omega, double w) noexcept {
  return w > 0.0 || (omega > 0.0 && s.delta == 1);
}

// y - theta'z for every subject. With weights supplied, subjects whose
// covariates are never read keep residual y; an unobserved subject whose
// covariates are needed is an error. Without weights every subject needs z.
std::vector<double> compute_residuals(const Cohort& cohort, const Vector& theta, std::span<const double> omega = {},
                                      std::span<const double> w = {});

RiskSetStats risk_stats(const Cohort& cohort, std::span<const double> w, const Vector& theta);

// Same, from residuals computed by the caller.
RiskSetStats risk_stats_from_residuals(const Cohort& cohort, std::span<const double> w,
                                       std::span<const double> residuals);

// Weighted at-risk covariate mean. Throws when D0(t) < min_risk_weight.
Vector eta_hat(const RiskSetStats& stats, double t, double min_risk_weight = 1e-12);

double rho_hat(const RiskSetStats& stats, double t) noexcept;

// Direct O(n) evaluation of (D0(t), D1(t)); test oracle for risk_stats.
std::pair<double, Vector> brute_force_risk_stats(const Cohort& cohort, std::span<const double> w,
                                                 const Vector& theta, double t);

void check_weights(const Cohort& cohort, std::span<const double> omega, std::span<const double> w);

}  // namespace aftcc
