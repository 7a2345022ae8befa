#include "aftcc/risk_set.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <random>

using namespace aftcc;
using aftcc::test::cohort_1d;
using aftcc::test::ones;

TEST_SUITE("risk_set") {
  TEST_CASE("residuals") {
    const Cohort c = cohort_1d({2.0, 3.0}, {1, 0}, {1.0, -2.0});
    const auto r0 = compute_residuals(c, Vector::Zero(1));
    CHECK(r0[0] == 2.0);
    CHECK(r0[1] == 3.0);
    const auto r = compute_residuals(c, Vector::Constant(1, 0.5));
    CHECK(r[0] == 1.5);
    CHECK(r[1] == 4.0);
    CHECK_THROWS_AS(compute_residuals(c, Vector::Zero(2)), Error);
  }

  TEST_CASE("three-subject risk set") {
    const Cohort c = cohort_1d({1, 2, 3}, {1, 1, 1}, {0, 1, 0});
    const auto w = ones(3);
    const RiskSetStats st = risk_stats(c, w, Vector::Zero(1));
    CHECK(st.d0_at(2.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(st.d1_at(2.0)[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(eta_hat(st, 2.0)[0] == doctest::Approx(0.5));
    CHECK(rho_hat(st, 2.0) == doctest::Approx(2.0 / 3.0));
    CHECK(rho_hat(st, 0.5) == 1.0);
    CHECK(rho_hat(st, 1.0) == 1.0);
    CHECK(rho_hat(st, 3.5) == 0.0);
    CHECK_THROWS_AS(eta_hat(st, 3.5), Error);
  }

  TEST_CASE("inclusive ties") {
    const Cohort c = cohort_1d({1, 1, 2}, {1, 1, 0}, {0, 1, 0});
    const auto w = ones(3);
    const RiskSetStats st = risk_stats(c, w, Vector::Zero(1));
    CHECK(st.d0_at(1.0) == 1.0);
    CHECK(st.num_groups() == 2);
    const auto bf = brute_force_risk_stats(c, w, Vector::Zero(1), 1.0);
    CHECK(bf.first == 1.0);
    CHECK(bf.second[0] == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("constant covariate gives eta equal to it") {
    const Cohort c = cohort_1d({1, 2, 3, 4}, {1, 0, 1, 0}, {2.5, 2.5, 2.5, 2.5});
    const std::vector<double> w{1.0, 3.0, 0.5, 2.0};
    const RiskSetStats st = risk_stats(c, w, Vector::Constant(1, 0.3));
    for (double t : {-5.0, 0.0, 0.7, 1.1}) CHECK(eta_hat(st, t)[0] == doctest::Approx(2.5).epsilon(1e-15));
  }

  TEST_CASE("singleton") {
    const Cohort c = cohort_1d({1.0}, {1}, {0.0});
    const auto bf = brute_force_risk_stats(c, ones(1), Vector::Zero(1), 1.0);
    CHECK(bf.first == 1.0);
  }

  TEST_CASE("zero and negative weights are rejected") {
    const Cohort c = cohort_1d({1, 2, 3}, {1, 1, 1}, {0, 1, 0});
    const std::vector<double> zero(3, 0.0), neg{1.0, -1.0, 1.0};
    CHECK_THROWS_AS(risk_stats(c, zero, Vector::Zero(1)), Error);
    CHECK_THROWS_AS(risk_stats(c, neg, Vector::Zero(1)), Error);
  }

  TEST_CASE("random instances: fast statistics match the direct oracle") {
    std::mt19937_64 gen(11);
    std::uniform_int_distribution<std::size_t> size(1, 200);
    for (int rep = 0; rep < 200; ++rep) {
      const Eigen::Index d = 1 + rep % 3;
      const auto inst = aftcc::test::random_instance(gen, size(gen), d);
      const Vector theta = aftcc::test::random_theta(gen, d, 0.5);
      const RiskSetStats st = risk_stats(inst.cohort, inst.w, theta);
      const auto res = compute_residuals(inst.cohort, theta);
      std::vector<double> probes = res;
      probes.push_back(res.front() - 1.0);
      probes.push_back(*std::max_element(res.begin(), res.end()) + 1.0);
      for (double t : probes) {
        const auto bf = brute_force_risk_stats(inst.cohort, inst.w, theta, t);
        CHECK(std::abs(st.d0_at(t) - bf.first) <= 1e-12);
        CHECK((st.d1_at(t) - bf.second).cwiseAbs().maxCoeff() <= 1e-12);
      }
    }
  }

  TEST_CASE("rho in [0,1], nonincreasing; eta within at-risk range; W-scale invariance") {
    std::mt19937_64 gen(12);
    for (int rep = 0; rep < 100; ++rep) {
      const auto inst = aftcc::test::random_instance(gen, 60, 1);
      const Vector theta = aftcc::test::random_theta(gen, 1, 0.5);
      const RiskSetStats st = risk_stats(inst.cohort, inst.w, theta);
      std::vector<double> scaled = inst.w;
      for (double& x : scaled) x *= 3.7;
      const RiskSetStats st2 = risk_stats(inst.cohort, scaled, theta);
      const auto res = compute_residuals(inst.cohort, theta);
      double prev = 1.0;
      for (double t = -10.0; t <= 10.0; t += 0.05) {
        const double r = rho_hat(st, t);
        CHECK(r >= 0.0);
        CHECK(r <= 1.0 + 1e-12);
        CHECK(r <= prev + 1e-12);
        prev = r;
        CHECK(rho_hat(st2, t) == doctest::Approx(r).epsilon(1e-13));
        if (st.d0_at(t) > 1e-12) {
          double lo = 1e300, hi = -1e300;
          for (std::size_t i = 0; i < inst.cohort.size(); ++i)
            if (inst.w[i] > 0.0 && res[i] >= t) {
              lo = std::min(lo, inst.cohort[i].z[0]);
              hi = std::max(hi, inst.cohort[i].z[0]);
            }
          const double e = eta_hat(st, t)[0];
          CHECK(e >= lo - 1e-12);
          CHECK(e <= hi + 1e-12);
          CHECK(eta_hat(st2, t)[0] == doctest::Approx(e).epsilon(1e-12));
        }
      }
    }
  }

  TEST_CASE("d0 nonincreasing and starts at sum W / n") {
    std::mt19937_64 gen(13);
    const auto inst = aftcc::test::random_instance(gen, 100, 2);
    const RiskSetStats st = risk_stats(inst.cohort, inst.w, Vector::Zero(2));
    double total = 0.0;
    for (double x : inst.w) total += x;
    CHECK(st.d0[0] == doctest::Approx(total / 100.0).epsilon(1e-14));
    for (std::size_t g = 1; g < st.num_groups(); ++g) CHECK(st.d0[g] <= st.d0[g - 1]);
  }
}
