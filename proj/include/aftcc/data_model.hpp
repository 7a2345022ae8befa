// Core domain types: subjects, cohorts, validation policy and the error type
// shared by every module.
#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aftcc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Coarse failure classes; the CLI maps them onto exit codes.
enum class ErrorKind { validation, numeric, io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

enum class Transform { identity, log };

Transform parse_transform(const std::string& name);
std::string to_string(Transform t);

// Maps a raw observed time onto the model scale. Throws for log of a
// nonpositive time.
double apply_transform(Transform t, double raw_time);

struct Subject {
  double y = 0.0;              // transformed observed time
  int delta = 0;               // 1 = event, 0 = censored
  Vector z;                    // covariates; ignored when observed == 0
  std::optional<int> stratum;  // sampling stratum label
  int observed = 1;            // full covariate vector available
  int in_subcohort = 0;
  std::optional<double> pi;    // selection probability
};

// Immutable collection of subjects sharing one covariate dimension.
class Cohort {
 public:
  Cohort() = default;
  Cohort(std::vector<Subject> subjects, Eigen::Index dim);

  std::size_t size() const noexcept { return subjects_.size(); }
  Eigen::Index dim() const noexcept { return dim_; }
  const Subject& operator[](std::size_t i) const { return subjects_[i]; }
  const std::vector<Subject>& subjects() const noexcept { return subjects_; }
  std::size_t num_events() const noexcept { return num_events_; }

  auto begin() const { return subjects_.begin(); }
  auto end() const { return subjects_.end(); }

 private:
  std::vector<Subject> subjects_;
  Eigen::Index dim_ = 0;
  std::size_t num_events_ = 0;
};

struct ValidationPolicy {
  double zeta = 1e-6;             // lower bound on selection probabilities
  std::optional<double> tau;      // residual horizon; event terms beyond it are dropped
  double min_risk_weight = 1e-12; // smallest usable D0 value (per-n scale)
};

void check_policy(const ValidationPolicy& policy);

}  // namespace aftcc
