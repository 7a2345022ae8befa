// Subject weight construction for the full-data, case-cohort and MAR
// designs, plus stratified sampling-fraction estimation.
//
// Omega multiplies each event term of the estimating function and W enters
// the risk-set averages. Supported schemes:
//
//   full_data                   Omega = W = 1
//   case_cohort_predictable     Omega = 1,  W = 1(in subcohort) / pi
//   case_cohort_nonpredictable  Omega = W = delta + (1 - delta) 1(in subcohort) / pi
//   mar_inverse_prob            Omega = W = observed / pi
//
// With estimated fractions, pi is replaced by the realized per-stratum
// fraction n*_s / n_s. For the non-predictable scheme the stratum pool is
// the censored subjects only (events are always sampled); otherwise it is
// every subject.
#pragma once

#include "aftcc/data_model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace aftcc {

enum class Scheme { full_data, case_cohort_predictable, case_cohort_nonpredictable, mar_inverse_prob };
enum class AlphaSource { true_pi, estimated_fractions };

Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme s);
AlphaSource parse_alpha_source(const std::string& name);
std::string to_string(AlphaSource a);

struct WeightPlan {
  Scheme scheme = Scheme::full_data;
  AlphaSource alpha_source = AlphaSource::true_pi;
  std::vector<int> strata;  // ordered labels; required for estimated fractions
};

struct StratumCount {
  std::size_t sampled = 0;  // n*_s
  std::size_t total = 0;    // n_s
};

struct AlphaEstimate {
  std::vector<int> strata;
  std::vector<double> alpha_hat;  // n*_s / n_s
  std::vector<double> gamma_hat;  // n_s / n, n the full cohort size
  std::vector<StratumCount> counts;
  std::size_t cohort_size = 0;

  std::size_t num_strata() const noexcept { return strata.size(); }
  // Position of a label in `strata`; throws for unknown labels.
  std::size_t index_of(int label) const;
};

struct Weights {
  std::vector<double> omega;
  std::vector<double> w;
  std::optional<AlphaEstimate> alpha;  // set when fractions were estimated
};

// True when Omega is the same function of alpha as W.
bool omega_follows_w(Scheme s) noexcept;

// Whether subject i counts as "sampled" for the scheme (subcohort membership
// for case-cohort designs, the observed flag for MAR).
bool sampled_flag(Scheme s, const Subject& subject) noexcept;

// Whether subject i belongs to the pool over which fractions are estimated.
bool in_alpha_pool(Scheme s, const Subject& subject) noexcept;

Weights assign_weights(const Cohort& cohort, const WeightPlan& plan);

AlphaEstimate estimate_alpha(const Cohort& cohort, const WeightPlan& plan);

double pi_from_alpha(const Subject& subject, const AlphaEstimate& estimate);

// Derivative of W(X; alpha) with respect to the per-stratum fractions,
// evaluated at `alpha` (indexed like estimate.strata).
Vector w_alpha_derivative(const Subject& subject, const AlphaEstimate& estimate, const std::vector<double>& alpha,
                          Scheme scheme = Scheme::case_cohort_nonpredictable);

// diag(alpha_s (1 - alpha_s) / gamma_s): asymptotic variance of the
// fractions on the sqrt(n) scale.
Matrix v0_hat(const AlphaEstimate& estimate);

}  // namespace aftcc
