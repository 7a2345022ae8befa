#pragma once

#include "aftcc/data_model.hpp"
#include "aftcc/sim_study.hpp"

#include <random>
#include <vector>

namespace aftcc::test {

// One-covariate cohort from parallel arrays.
inline Cohort cohort_1d(const std::vector<double>& y, const std::vector<int>& delta, const std::vector<double>& z) {
  std::vector<Subject> s;
  for (std::size_t i = 0; i < y.size(); ++i) {
    Subject x;
    x.y = y[i];
    x.delta = delta[i];
    x.z = Vector::Constant(1, z[i]);
    s.push_back(x);
  }
  return Cohort(std::move(s), 1);
}

inline std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

struct RandomInstance {
  Cohort cohort;
  std::vector<double> omega;
  std::vector<double> w;
};

// Random cohort with rounded times (ties), some zero weights, d covariates.
inline RandomInstance random_instance(std::mt19937_64& gen, std::size_t n, Eigen::Index d, bool zero_weights = true) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Subject> subjects;
  std::vector<double> omega, w;
  for (std::size_t i = 0; i < n; ++i) {
    Subject s;
    s.y = std::round(g(gen) * 8.0) / 4.0;
    s.delta = u(gen) < 0.6 ? 1 : 0;
    s.z = Vector(d);
    for (Eigen::Index k = 0; k < d; ++k) s.z[k] = u(gen) < 0.3 ? std::round(g(gen) * 2.0) / 2.0 : g(gen);
    subjects.push_back(s);
    const double wi = (zero_weights && u(gen) < 0.2) ? 0.0 : 0.5 + 3.0 * u(gen);
    w.push_back(wi);
    omega.push_back(s.delta == 1 ? 1.0 + u(gen) : wi);
  }
  // At least one event with a positive weight and positive total weight.
  subjects[0].delta = 1;
  omega[0] = 1.0;
  w[0] = 1.0;
  return {Cohort(std::move(subjects), d), omega, w};
}

inline Vector random_theta(std::mt19937_64& gen, Eigen::Index d, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector t(d);
  for (Eigen::Index k = 0; k < d; ++k) t[k] = g(gen);
  return t;
}

}  // namespace aftcc::test
