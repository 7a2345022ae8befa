#include "aftcc/weight_schemes.hpp"

#include <algorithm>

namespace aftcc {

Scheme parse_scheme(const std::string& name) {
  if (name == "full_data" || name == "full") return Scheme::full_data;
  if (name == "case_cohort_predictable" || name == "predictable") return Scheme::case_cohort_predictable;
  if (name == "case_cohort_nonpredictable" || name == "nonpredictable") return Scheme::case_cohort_nonpredictable;
  if (name == "mar_inverse_prob" || name == "mar") return Scheme::mar_inverse_prob;
  fail(ErrorKind::validation, "unknown weight scheme '" + name + "'");
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::full_data: return "full_data";
    case Scheme::case_cohort_predictable: return "case_cohort_predictable";
    case Scheme::case_cohort_nonpredictable: return "case_cohort_nonpredictable";
    case Scheme::mar_inverse_prob: return "mar_inverse_prob";
  }
  return "?";
}

AlphaSource parse_alpha_source(const std::string& name) {
  if (name == "true_pi" || name == "true") return AlphaSource::true_pi;
  if (name == "estimated_fractions" || name == "estimated") return AlphaSource::estimated_fractions;
  fail(ErrorKind::validation, "unknown alpha source '" + name + "'");
}

std::string to_string(AlphaSource a) {
  return a == AlphaSource::true_pi ? "true_pi" : "estimated_fractions";
}

std::size_t AlphaEstimate::index_of(int label) const {
  auto it = std::find(strata.begin(), strata.end(), label);
  if (it == strata.end()) fail(ErrorKind::validation, "stratum " + std::to_string(label) + " not in estimate");
  return static_cast<std::size_t>(it - strata.begin());
}

bool omega_follows_w(Scheme s) noexcept {
  return s == Scheme::case_cohort_nonpredictable || s == Scheme::mar_inverse_prob;
}

bool sampled_flag(Scheme s, const Subject& subject) noexcept {
  switch (s) {
    case Scheme::full_data: return true;
    case Scheme::mar_inverse_prob: return subject.observed == 1;
    default: return subject.in_subcohort == 1;
  }
}

bool in_alpha_pool(Scheme s, const Subject& subject) noexcept {
  return s != Scheme::case_cohort_nonpredictable || subject.delta == 0;
}

AlphaEstimate estimate_alpha(const Cohort& cohort, const WeightPlan& plan) {
  if (plan.strata.empty()) fail(ErrorKind::validation, "estimated fractions require at least one stratum");
  AlphaEstimate est;
  est.strata = plan.strata;
  est.cohort_size = cohort.size();
  est.counts.assign(plan.strata.size(), {});
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const Subject& s = cohort[i];
    if (!in_alpha_pool(plan.scheme, s)) continue;
    if (!s.stratum) fail(ErrorKind::validation, "subject " + std::to_string(i) + " has no stratum label");
    StratumCount& c = est.counts[est.index_of(*s.stratum)];
    ++c.total;
    if (sampled_flag(plan.scheme, s)) ++c.sampled;
  }
  const double n = static_cast<double>(cohort.size());
  for (std::size_t k = 0; k < est.counts.size(); ++k) {
    const StratumCount& c = est.counts[k];
    const std::string label = std::to_string(est.strata[k]);
    if (c.total == 0) fail(ErrorKind::validation, "stratum " + label + " is empty");
    if (c.sampled == 0) fail(ErrorKind::validation, "stratum " + label + " has no sampled subjects");
    est.alpha_hat.push_back(static_cast<double>(c.sampled) / static_cast<double>(c.total));
    est.gamma_hat.push_back(static_cast<double>(c.total) / n);
  }
  return est;
}

double pi_from_alpha(const Subject& subject, const AlphaEstimate& estimate) {
  if (!subject.stratum) fail(ErrorKind::validation, "subject has no stratum label");
  return estimate.alpha_hat[estimate.index_of(*subject.stratum)];
}

Weights assign_weights(const Cohort& cohort, const WeightPlan& plan) {
  const std::size_t n = cohort.size();
  Weights out;
  out.omega.assign(n, 1.0);
  out.w.assign(n, 1.0);
  if (plan.scheme == Scheme::full_data) return out;

  const bool estimated = plan.alpha_source == AlphaSource::estimated_fractions;
  if (estimated) out.alpha = estimate_alpha(cohort, plan);

  auto inverse_pi = [&](std::size_t i) {
    const Subject& s = cohort[i];
    double pi = 0.0;
    if (estimated) {
      pi = pi_from_alpha(s, *out.alpha);
    } else {
      if (!s.pi) fail(ErrorKind::validation, "subject " + std::to_string(i) + " needs a selection probability");
      pi = *s.pi;
    }
    if (!(pi > 0.0)) fail(ErrorKind::validation, "subject " + std::to_string(i) + " has zero selection probability");
    return 1.0 / pi;
  };

  for (std::size_t i = 0; i < n; ++i) {
    const Subject& s = cohort[i];
    switch (plan.scheme) {
      case Scheme::case_cohort_predictable:
        out.w[i] = s.in_subcohort ? inverse_pi(i) : 0.0;
        break;
      case Scheme::case_cohort_nonpredictable:
        out.w[i] = s.delta == 1 ? 1.0 : (s.in_subcohort ? inverse_pi(i) : 0.0);
        out.omega[i] = out.w[i];
        break;
      case Scheme::mar_inverse_prob:
        out.w[i] = s.observed ? inverse_pi(i) : 0.0;
        out.omega[i] = out.w[i];
        break;
      case Scheme::full_data:
        break;
    }
  }
  return out;
}

Vector w_alpha_derivative(const Subject& subject, const AlphaEstimate& estimate, const std::vector<double>& alpha,
                          Scheme scheme) {
  Vector grad = Vector::Zero(static_cast<Eigen::Index>(estimate.num_strata()));
  if (scheme == Scheme::full_data || !in_alpha_pool(scheme, subject) || !sampled_flag(scheme, subject)) return grad;
  if (!subject.stratum) fail(ErrorKind::validation, "sampled subject has no stratum label");
  const std::size_t k = estimate.index_of(*subject.stratum);
  if (!(alpha.at(k) > 0.0)) fail(ErrorKind::numeric, "zero sampling fraction in stratum derivative");
  grad[static_cast<Eigen::Index>(k)] = -1.0 / (alpha[k] * alpha[k]);
  return grad;
}

Matrix v0_hat(const AlphaEstimate& estimate) {
  const auto s = static_cast<Eigen::Index>(estimate.num_strata());
  Matrix v0 = Matrix::Zero(s, s);
  for (Eigen::Index k = 0; k < s; ++k) {
    const double g = estimate.gamma_hat[static_cast<std::size_t>(k)];
    if (!(g > 0.0)) fail(ErrorKind::numeric, "zero stratum size fraction");
    const double a = estimate.alpha_hat[static_cast<std::size_t>(k)];
    v0(k, k) = a * (1.0 - a) / g;
  }
  return v0;
}

}  // namespace aftcc
