// Approximate roots of the rank estimating function.
//
// Gehan: Psi is the subgradient of a convex piecewise-linear loss, hence a
// nondecreasing step function along every line. In one dimension the root
// is found by bracketing and bisection, returning the left end of the zero
// plateau (or the jump point when Psi changes sign without touching zero).
// In higher dimensions the loss is minimized by exact line searches along
// coordinate, subgradient and pseudo-random directions.
//
// Logrank: Psi is not monotone, so ||Psi||^2 is minimized by Nelder-Mead
// started at the Gehan solution and then polished on a small local grid.
#pragma once

#include "aftcc/data_model.hpp"
#include "aftcc/estimating_function.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace aftcc {

struct SolveOptions {
  double tol_theta = 1e-6;
  double tol_psi_scaled = 0.5;  // threshold on sqrt(n) * ||Psi(theta_hat)||
  int max_iter = 200;
  double search_radius = 1.0;
  ValidationPolicy policy;
};

void check_options(const SolveOptions& options);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const noexcept { return hi - lo; }
};

struct TraceStep {
  int iteration = 0;
  Vector theta;
  double objective = 0.0;
};

struct FitResult {
  RhoKind rho = RhoKind::gehan;
  Vector theta_hat;
  Vector psi_at_solution;
  double scaled_norm = 0.0;
  // Per coordinate; set when the zero set along that coordinate is an
  // interval wider than tol_theta (hi may be +inf).
  std::vector<std::optional<Interval>> flat_region;
  std::vector<TraceStep> trace;
  std::size_t dropped_terms = 0;
  int iterations = 0;
  bool above_threshold = false;     // scaled_norm > tol_psi_scaled
  bool degenerate = false;          // Psi vanishes identically
  bool possibly_nonunique = false;  // independent starts disagree
};

// sqrt(n) * ||Psi(theta)||.
double scaled_psi_norm(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                       const Vector& theta, RhoKind rho, const ValidationPolicy& policy = {});

// Result of a one-dimensional search on a nondecreasing function g.
struct MonotoneRoot {
  double root = 0.0;  // sup{s : g(s) < 0}, to within tol
  double plateau_hi = 0.0;  // inf{s : g(s) > 0} when g(root) == 0, else root
  bool degenerate = false;  // g == 0 across the whole expanded bracket
  int evaluations = 0;
};

MonotoneRoot leftmost_root(const std::function<double(double)>& g, double start, double radius, double tol,
                           int max_iter);

FitResult solve_gehan(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                      const SolveOptions& options = {});

FitResult solve_logrank(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                        const SolveOptions& options = {}, std::optional<Vector> seed_theta = std::nullopt);

FitResult solve(const Cohort& cohort, std::span<const double> omega, std::span<const double> w, RhoKind rho,
                const SolveOptions& options = {});

}  // namespace aftcc
