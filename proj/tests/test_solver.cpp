#include "aftcc/sim_study.hpp"
#include "aftcc/solver.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <random>

using namespace aftcc;
using aftcc::test::cohort_1d;
using aftcc::test::ones;

TEST_SUITE("solver") {
  TEST_CASE("leftmost root of a monotone step function") {
    const auto g = [](double s) { return s < 0.3 ? -1.0 : (s < 0.8 ? 0.0 : 1.0); };
    const MonotoneRoot r = leftmost_root(g, 0.0, 1.0, 1e-9, 200);
    CHECK(r.root == doctest::Approx(0.3).epsilon(1e-8));
    CHECK(r.plateau_hi == doctest::Approx(0.8).epsilon(1e-8));
    CHECK_FALSE(r.degenerate);
    const MonotoneRoot jump = leftmost_root([](double s) { return s < 2.5 ? -1.0 : 1.0; }, 0.0, 0.1, 1e-9, 200);
    CHECK(jump.root == doctest::Approx(2.5).epsilon(1e-8));
    CHECK(leftmost_root([](double) { return 0.0; }, 0.0, 1.0, 1e-9, 200).degenerate);
    CHECK_THROWS_AS(leftmost_root([](double) { return 1.0; }, 0.0, 1.0, 1e-9, 200), Error);
  }

  TEST_CASE("two-subject instance: left end of the zero plateau") {
    const Cohort c = cohort_1d({1, 2}, {1, 0}, {0, 1});
    const auto w = ones(2);
    const FitResult f = solve_gehan(c, w, w);
    CHECK(f.theta_hat[0] == doctest::Approx(1.0).epsilon(1e-6));
    REQUIRE(f.flat_region[0].has_value());
    CHECK(f.flat_region[0]->lo == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(f.flat_region[0]->hi > 1e6);
    CHECK(f.scaled_norm == 0.0);
  }

  TEST_CASE("shifting y by z * c shifts the minimizing set by c") {
    std::mt19937_64 gen(37);
    for (int rep = 0; rep < 20; ++rep) {
      const auto inst = aftcc::test::random_instance(gen, 50, 2);
      const Vector c = aftcc::test::random_theta(gen, 2, 1.0);
      std::vector<Subject> shifted(inst.cohort.subjects().begin(), inst.cohort.subjects().end());
      for (Subject& s : shifted) s.y += s.z.dot(c);
      const Cohort moved(std::move(shifted), 2);
      const FitResult f0 = solve_gehan(inst.cohort, inst.omega, inst.w);
      const FitResult f1 = solve_gehan(moved, inst.omega, inst.w);
      const double l0 = gehan_loss(inst.cohort, inst.omega, inst.w, f0.theta_hat);
      const double l1 = gehan_loss(inst.cohort, inst.omega, inst.w, Vector(f1.theta_hat - c));
      CHECK(std::abs(l1 - l0) <= 1e-5);
    }
  }

  TEST_CASE("d = 1 Gehan solution minimizes the loss on a dense grid") {
    std::mt19937_64 gen(41);
    for (int rep = 0; rep < 50; ++rep) {
      const auto inst = aftcc::test::random_instance(gen, 60, 1);
      const FitResult f = solve_gehan(inst.cohort, inst.omega, inst.w);
      const double at = gehan_loss(inst.cohort, inst.omega, inst.w, f.theta_hat);
      double best = at;
      for (double t = f.theta_hat[0] - 5.0; t <= f.theta_hat[0] + 5.0; t += 1e-3)
        best = std::min(best, gehan_loss(inst.cohort, inst.omega, inst.w, Vector::Constant(1, t)));
      CHECK(at <= best + 1e-9);
    }
  }

  TEST_CASE("d = 2 Gehan solution is a loss minimizer") {
    std::mt19937_64 gen(42);
    for (int rep = 0; rep < 10; ++rep) {
      const auto inst = aftcc::test::random_instance(gen, 80, 2);
      const FitResult f = solve_gehan(inst.cohort, inst.omega, inst.w);
      const double at = gehan_loss(inst.cohort, inst.omega, inst.w, f.theta_hat);
      for (int k = 0; k < 200; ++k) {
        const Vector t = f.theta_hat + aftcc::test::random_theta(gen, 2, 0.3);
        CHECK(at <= gehan_loss(inst.cohort, inst.omega, inst.w, t) + 1e-9);
      }
    }
  }

  TEST_CASE("scaled norm and determinism") {
    std::mt19937_64 gen(43);
    const auto inst = aftcc::test::random_instance(gen, 100, 2);
    for (RhoKind r : {RhoKind::gehan, RhoKind::logrank}) {
      const FitResult a = solve(inst.cohort, inst.omega, inst.w, r);
      const FitResult b = solve(inst.cohort, inst.omega, inst.w, r);
      CHECK(a.theta_hat == b.theta_hat);
      CHECK(a.scaled_norm == b.scaled_norm);
      CHECK(std::abs(scaled_psi_norm(inst.cohort, inst.omega, inst.w, a.theta_hat, r) - a.scaled_norm) <= 1e-12);
    }
  }

  TEST_CASE("weight scaling leaves the solution unchanged") {
    std::mt19937_64 gen(44);
    const auto inst = aftcc::test::random_instance(gen, 120, 1);
    auto scaled = [](std::vector<double> v, double c) {
      for (double& x : v) x *= c;
      return v;
    };
    const FitResult base = solve_gehan(inst.cohort, inst.omega, inst.w);
    CHECK(std::abs(solve_gehan(inst.cohort, inst.omega, scaled(inst.w, 3.0)).theta_hat[0] - base.theta_hat[0]) <= 1e-6);
    CHECK(std::abs(solve_gehan(inst.cohort, scaled(inst.omega, 0.5), inst.w).theta_hat[0] - base.theta_hat[0]) <= 1e-6);
  }

  TEST_CASE("logrank: identical covariates are degenerate") {
    const Cohort c = cohort_1d({1, 2, 3, 4}, {1, 0, 1, 1}, {1, 1, 1, 1});
    const auto w = ones(4);
    const FitResult f = solve_logrank(c, w, w);
    CHECK(f.degenerate);
    CHECK(f.psi_at_solution.isZero(0.0));
  }

  TEST_CASE("logrank: three-subject instance moves off zero") {
    const Cohort c = cohort_1d({1, 2, 3}, {1, 1, 0}, {0, 1, 0});
    const auto w = ones(3);
    const FitResult f = solve_logrank(c, w, w);
    CHECK(f.theta_hat[0] != 0.0);
    CHECK((f.scaled_norm <= SolveOptions{}.tol_psi_scaled || f.above_threshold));
  }

  TEST_CASE("consistency at n = 5000, normal error, full data") {
    StudyConfig cfg;
    cfg.error_dist = ErrorDist::normal;
    cfg.n = 5000;
    const Cohort c = complete_cohort(generate_cohort(cfg, 0));
    const auto w = ones(c.size());
    const FitResult g = solve_gehan(c, w, w);
    const FitResult l = solve_logrank(c, w, w, {}, g.theta_hat);
    CHECK(std::abs(g.theta_hat[0]) <= 0.06);
    CHECK(std::abs(l.theta_hat[0]) <= 0.06);
    CHECK_FALSE(l.above_threshold);
  }

  TEST_CASE("options are validated") {
    SolveOptions o;
    o.tol_theta = 0.0;
    CHECK_THROWS_AS(check_options(o), Error);
    o = SolveOptions{};
    o.max_iter = 0;
    CHECK_THROWS_AS(check_options(o), Error);
  }
}
