// The doubly weighted rank estimating function
//
//   Psi(theta) = (1/n) sum_i Omega_i rho(e_i) (z_i - eta(e_i)) delta_i
//
// with rho = 1 (logrank) or rho(t) = D0(t) / (sum W / n) (Gehan), together
// with the convex Gehan loss whose subgradient is the Gehan Psi.
#pragma once

#include "aftcc/data_model.hpp"
#include "aftcc/risk_set.hpp"
#include "aftcc/weight_schemes.hpp"

#include <span>
#include <string>

namespace aftcc {

enum class RhoKind { logrank, gehan };

RhoKind parse_rho(const std::string& name);
std::string to_string(RhoKind r);

struct PsiValue {
  Vector psi;
  std::size_t n_event_terms = 0;
  std::size_t n_dropped = 0;  // event terms with an empty risk set or beyond tau
};

PsiValue psi(const Cohort& cohort, std::span<const double> omega, std::span<const double> w, const Vector& theta,
             RhoKind rho, const ValidationPolicy& policy = {});

// Evaluation from precomputed residuals and risk-set statistics.
PsiValue psi_from_stats(const Cohort& cohort, std::span<const double> omega, std::span<const double> residuals,
                        const RiskSetStats& stats, RhoKind rho, const ValidationPolicy& policy = {});

// Whether event term i survives the empty-risk-set and horizon rules.
bool event_term_used(const RiskSetStats& stats, double residual, const ValidationPolicy& policy) noexcept;

// O(n^2) evaluation of the Gehan Psi through its pairwise form
//   (1 / (n sum W)) sum_i sum_j Omega_i W_j delta_i 1(e_j >= e_i) (z_i - z_j).
Vector psi_pairwise_oracle(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                           const Vector& theta);

// (1 / (n sum W)) sum_i sum_j Omega_i W_j delta_i max(e_j - e_i, 0).
double gehan_loss(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                  const Vector& theta);

// Psi with the weights the plan produces, normally with estimated sampling
// fractions in place of the design probabilities.
PsiValue psi_star(const Cohort& cohort, const WeightPlan& plan, const Vector& theta, RhoKind rho,
                  const ValidationPolicy& policy = {});

}  // namespace aftcc
