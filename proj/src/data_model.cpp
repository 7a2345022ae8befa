#include "aftcc/data_model.hpp"

#include <cmath>

namespace aftcc {

Transform parse_transform(const std::string& name) {
  if (name == "identity") return Transform::identity;
  if (name == "log") return Transform::log;
  fail(ErrorKind::validation, "unknown transform '" + name + "' (expected identity or log)");
}

std::string to_string(Transform t) { return t == Transform::log ? "log" : "identity"; }

double apply_transform(Transform t, double raw_time) {
  if (!std::isfinite(raw_time)) fail(ErrorKind::validation, "non-finite observed time");
  if (t == Transform::identity) return raw_time;
  if (raw_time <= 0.0)
    fail(ErrorKind::validation, "log transform requires positive times, got " + std::to_string(raw_time));
  return std::log(raw_time);
}

Cohort::Cohort(std::vector<Subject> subjects, Eigen::Index dim) : subjects_(std::move(subjects)), dim_(dim) {
  if (dim_ < 1) fail(ErrorKind::validation, "covariate dimension must be at least 1");
  for (std::size_t i = 0; i < subjects_.size(); ++i) {
    const Subject& s = subjects_[i];
    const std::string where = "subject " + std::to_string(i);
    if (s.delta != 0 && s.delta != 1) fail(ErrorKind::validation, where + ": delta must be 0 or 1");
    if (s.observed != 0 && s.observed != 1) fail(ErrorKind::validation, where + ": observed must be 0 or 1");
    if (s.in_subcohort != 0 && s.in_subcohort != 1)
      fail(ErrorKind::validation, where + ": in_subcohort must be 0 or 1");
    if (!std::isfinite(s.y)) fail(ErrorKind::validation, where + ": non-finite time");
    if (s.observed == 1 && s.z.size() != dim_)
      fail(ErrorKind::validation, where + ": covariate length " + std::to_string(s.z.size()) + " != " +
                                      std::to_string(dim_));
    if (s.pi && !(*s.pi > 0.0 && *s.pi <= 1.0))
      fail(ErrorKind::validation, where + ": pi must lie in (0, 1]");
    num_events_ += static_cast<std::size_t>(s.delta);
  }
}

void check_policy(const ValidationPolicy& policy) {
  if (!(policy.zeta > 0.0)) fail(ErrorKind::validation, "zeta must be positive");
  if (!(policy.min_risk_weight > 0.0)) fail(ErrorKind::validation, "min_risk_weight must be positive");
}

}  // namespace aftcc
