#include "aftcc/estimating_function.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <random>

using namespace aftcc;
using aftcc::test::cohort_1d;
using aftcc::test::ones;

namespace {

Vector th(double v) { return Vector::Constant(1, v); }

}  // namespace

TEST_SUITE("estimating_function") {
  TEST_CASE("two-subject instance") {
    const Cohort c = cohort_1d({1, 2}, {1, 0}, {0, 1});
    const auto w = ones(2);
    CHECK(psi(c, w, w, th(0), RhoKind::logrank).psi[0] == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(psi(c, w, w, th(0), RhoKind::gehan).psi[0] == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(psi_pairwise_oracle(c, w, w, th(0))[0] == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(gehan_loss(c, w, w, th(0)) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(gehan_loss(c, w, w, th(2)) == 0.0);
  }

  TEST_CASE("three-subject instance") {
    const Cohort c = cohort_1d({1, 2, 3}, {1, 1, 0}, {0, 1, 0});
    const auto w = ones(3);
    CHECK(psi(c, w, w, th(0), RhoKind::logrank).psi[0] == doctest::Approx(1.0 / 18.0).epsilon(1e-15));
    CHECK(std::abs(psi(c, w, w, th(0), RhoKind::gehan).psi[0]) <= 1e-16);
    CHECK(std::abs(psi_pairwise_oracle(c, w, w, th(0))[0]) <= 1e-16);
    const PsiValue p = psi(c, w, w, th(0), RhoKind::logrank);
    CHECK(p.n_event_terms == 2);
    CHECK(p.n_dropped == 0);
  }

  TEST_CASE("identical covariates give exactly zero and constant loss") {
    const Cohort c = cohort_1d({1, 2, 3, 0.5}, {1, 1, 0, 1}, {0.7, 0.7, 0.7, 0.7});
    const std::vector<double> w{1.0, 2.0, 0.5, 1.5};
    for (double t : {-1.0, 0.0, 0.4, 3.0}) {
      CHECK(psi(c, w, w, th(t), RhoKind::logrank).psi[0] == 0.0);
      CHECK(psi(c, w, w, th(t), RhoKind::gehan).psi[0] == 0.0);
      CHECK(gehan_loss(c, w, w, th(t)) == doctest::Approx(gehan_loss(c, w, w, th(0))).epsilon(1e-14));
    }
  }

  TEST_CASE("single subject oracle is zero") {
    const Cohort c = cohort_1d({1}, {1}, {2});
    CHECK(psi_pairwise_oracle(c, ones(1), ones(1), th(0))[0] == 0.0);
  }

  TEST_CASE("random instances: fast Gehan psi matches the pairwise oracle") {
    std::mt19937_64 gen(21);
    std::uniform_int_distribution<std::size_t> size(1, 200);
    for (int rep = 0; rep < 300; ++rep) {
      const Eigen::Index d = 1 + rep % 3;
      const auto inst = aftcc::test::random_instance(gen, size(gen), d);
      const Vector theta = aftcc::test::random_theta(gen, d);
      const Vector fast = psi(inst.cohort, inst.omega, inst.w, theta, RhoKind::gehan).psi;
      const Vector slow = psi_pairwise_oracle(inst.cohort, inst.omega, inst.w, theta);
      CHECK((fast - slow).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }

  TEST_CASE("event term accounting") {
    std::mt19937_64 gen(22);
    for (int rep = 0; rep < 50; ++rep) {
      const auto inst = aftcc::test::random_instance(gen, 80, 1);
      const PsiValue p = psi(inst.cohort, inst.omega, inst.w, th(0.3), RhoKind::logrank);
      std::size_t events = 0;
      for (std::size_t i = 0; i < inst.cohort.size(); ++i) events += inst.cohort[i].delta == 1 && inst.omega[i] > 0.0;
      CHECK(p.n_event_terms + p.n_dropped == events);
    }
  }

  TEST_CASE("monotone operator inequality") {
    std::mt19937_64 gen(23);
    for (int rep = 0; rep < 200; ++rep) {
      const Eigen::Index d = 1 + rep % 3;
      const auto inst = aftcc::test::random_instance(gen, 50, d);
      const Vector a = aftcc::test::random_theta(gen, d), b = aftcc::test::random_theta(gen, d);
      const Vector pa = psi(inst.cohort, inst.omega, inst.w, a, RhoKind::gehan).psi;
      const Vector pb = psi(inst.cohort, inst.omega, inst.w, b, RhoKind::gehan).psi;
      CHECK((pa - pb).dot(a - b) >= -1e-10);
    }
  }

  TEST_CASE("one dimension: Gehan psi is nondecreasing") {
    std::mt19937_64 gen(24);
    for (int rep = 0; rep < 20; ++rep) {
      const auto inst = aftcc::test::random_instance(gen, 40, 1);
      double prev = -1e300;
      for (double t = -4.0; t <= 4.0; t += 0.01) {
        const double p = psi(inst.cohort, inst.omega, inst.w, th(t), RhoKind::gehan).psi[0];
        CHECK(p >= prev - 1e-14);
        prev = p;
      }
    }
  }

  TEST_CASE("finite-difference slope of the loss equals psi away from knots") {
    std::mt19937_64 gen(25);
    for (int rep = 0; rep < 100; ++rep) {
      const Eigen::Index d = 1 + rep % 2;
      const auto inst = aftcc::test::random_instance(gen, 40, d);
      const Vector theta = aftcc::test::random_theta(gen, d) + Vector::Constant(d, 1e-7 * std::sqrt(2.0));
      const Vector p = psi(inst.cohort, inst.omega, inst.w, theta, RhoKind::gehan).psi;
      const double h = 1e-9;
      for (Eigen::Index k = 0; k < d; ++k) {
        const Vector e = Vector::Unit(d, k) * h;
        const double fd = (gehan_loss(inst.cohort, inst.omega, inst.w, theta + e) -
                           gehan_loss(inst.cohort, inst.omega, inst.w, theta - e)) / (2.0 * h);
        CHECK(std::abs(fd - p[k]) <= 1e-6);
      }
    }
  }

  TEST_CASE("omega and W scaling") {
    std::mt19937_64 gen(26);
    const auto inst = aftcc::test::random_instance(gen, 60, 2);
    const Vector theta = aftcc::test::random_theta(gen, 2);
    auto scaled = [](std::vector<double> v, double c) {
      for (double& x : v) x *= c;
      return v;
    };
    for (RhoKind r : {RhoKind::logrank, RhoKind::gehan}) {
      const Vector base = psi(inst.cohort, inst.omega, inst.w, theta, r).psi;
      const Vector ws = psi(inst.cohort, inst.omega, scaled(inst.w, 4.0), theta, r).psi;
      const Vector os = psi(inst.cohort, scaled(inst.omega, 2.5), inst.w, theta, r).psi;
      CHECK((ws - base).cwiseAbs().maxCoeff() <= 1e-14);
      CHECK((os - 2.5 * base).cwiseAbs().maxCoeff() <= 1e-14);
    }
  }

  TEST_CASE("whole-cohort subcohort: nonpredictable weights equal full data") {
    std::vector<Subject> s;
    std::mt19937_64 gen(27);
    std::normal_distribution<double> g;
    for (int i = 0; i < 30; ++i) {
      Subject x;
      x.y = g(gen);
      x.delta = i % 3 == 0;
      x.z = Vector::Constant(1, g(gen));
      x.in_subcohort = 1;
      x.pi = 1.0;
      x.stratum = i % 2;
      s.push_back(x);
    }
    const Cohort c(std::move(s), 1);
    const Weights wt = assign_weights(c, {Scheme::case_cohort_nonpredictable, AlphaSource::true_pi, {}});
    const auto one = ones(30);
    for (RhoKind r : {RhoKind::logrank, RhoKind::gehan}) {
      const Vector a = psi(c, wt.omega, wt.w, th(0.2), r).psi;
      const Vector b = psi(c, one, one, th(0.2), r).psi;
      CHECK(a[0] == b[0]);
      const WeightPlan est{Scheme::case_cohort_nonpredictable, AlphaSource::estimated_fractions, {0, 1}};
      CHECK(psi_star(c, est, th(0.2), r).psi[0] == doctest::Approx(b[0]).epsilon(1e-14));
      CHECK(psi_star(c, WeightPlan{}, th(0.2), r).psi[0] == b[0]);
    }
  }

  TEST_CASE("psi_star equals true-weight psi when fractions match the design") {
    std::vector<Subject> s;
    for (int i = 0; i < 20; ++i) {
      Subject x;
      x.y = 0.1 * i;
      x.delta = i % 4 == 0;
      x.z = Vector::Constant(1, (i * 7) % 5);
      x.stratum = 0;
      x.in_subcohort = i % 2;  // exactly half of all subjects
      x.pi = 0.5;
      s.push_back(x);
    }
    const Cohort c(std::move(s), 1);
    const WeightPlan truth{Scheme::case_cohort_predictable, AlphaSource::true_pi, {}};
    const WeightPlan est{Scheme::case_cohort_predictable, AlphaSource::estimated_fractions, {0}};
    const Weights wt = assign_weights(c, truth);
    for (RhoKind r : {RhoKind::logrank, RhoKind::gehan})
      CHECK(psi_star(c, est, th(0.1), r).psi[0] == psi(c, wt.omega, wt.w, th(0.1), r).psi[0]);
    CHECK_THROWS_AS(psi_star(c, truth, th(0.1), RhoKind::gehan), Error);
  }

  TEST_CASE("horizon drops late event terms") {
    const Cohort c = cohort_1d({1, 2, 3}, {1, 1, 0}, {0, 1, 0});
    const auto w = ones(3);
    ValidationPolicy pol;
    pol.tau = 1.5;
    const PsiValue p = psi(c, w, w, th(0), RhoKind::logrank, pol);
    CHECK(p.n_event_terms == 1);
    CHECK(p.n_dropped == 1);
    CHECK(p.psi[0] == doctest::Approx(-1.0 / 9.0));
  }

  TEST_CASE("rho parsing") {
    CHECK(parse_rho("gehan") == RhoKind::gehan);
    CHECK(parse_rho("logrank") == RhoKind::logrank);
    CHECK_THROWS_AS(parse_rho("wilcoxon"), Error);
  }
}
