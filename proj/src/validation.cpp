#include "aftcc/validation.hpp"

namespace aftcc {

std::string to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::too_few_subjects: return "too_few_subjects";
    case ViolationKind::no_events: return "no_events";
    case ViolationKind::selection_probability: return "selection_probability";
    case ViolationKind::unobserved_weighted: return "unobserved_weighted";
    case ViolationKind::plan_incompatible: return "plan_incompatible";
  }
  return "?";
}

std::vector<Violation> validate_cohort(const Cohort& cohort, const WeightPlan& plan, const ValidationPolicy& policy) {
  check_policy(policy);
  std::vector<Violation> out;
  if (cohort.size() < 2)
    out.push_back({ViolationKind::too_few_subjects, std::nullopt, "cohort needs at least 2 subjects"});
  if (cohort.num_events() == 0) out.push_back({ViolationKind::no_events, std::nullopt, "no events in cohort"});

  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const Subject& s = cohort[i];
    if (s.pi && *s.pi < policy.zeta)
      out.push_back({ViolationKind::selection_probability, i,
                     "subject " + std::to_string(i) + ": pi = " + std::to_string(*s.pi) + " below zeta = " +
                         std::to_string(policy.zeta)});
  }

  try {
    const Weights wt = assign_weights(cohort, plan);
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      const Subject& s = cohort[i];
      const bool reads_z = wt.w[i] > 0.0 || (wt.omega[i] > 0.0 && s.delta == 1);
      if (s.observed == 0 && reads_z)
        out.push_back({ViolationKind::unobserved_weighted, i,
                       "subject " + std::to_string(i) + ": covariates unobserved but weighted by the plan"});
    }
  } catch (const Error& e) {
    out.push_back({ViolationKind::plan_incompatible, std::nullopt, e.what()});
  }
  return out;
}

}  // namespace aftcc
