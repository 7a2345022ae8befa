// Pre-fit checks of a cohort against a weight plan and a validation policy.
#pragma once

#include "aftcc/data_model.hpp"
#include "aftcc/weight_schemes.hpp"

#include <optional>
#include <string>
#include <vector>

namespace aftcc {

enum class ViolationKind {
  too_few_subjects,
  no_events,
  selection_probability,  // pi below zeta
  unobserved_weighted,    // covariates missing but the plan would read them
  plan_incompatible,      // the plan cannot be applied (missing pi, empty stratum, ...)
};

std::string to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::optional<std::size_t> subject;
  std::string message;
};

// Returns every violation found; an empty result means fitting may proceed.
std::vector<Violation> validate_cohort(const Cohort& cohort, const WeightPlan& plan,
                                       const ValidationPolicy& policy = {});

}  // namespace aftcc
