#include "aftcc/solver.hpp"

#include "aftcc/rng.hpp"

#include <algorithm>
#include <cmath>

namespace aftcc {

namespace {

constexpr int kMaxExpansions = 48;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_fit_inputs(const Cohort& cohort, std::span<const double> omega, std::span<const double> w) {
  check_weights(cohort, omega, w);
  bool any_event = false;
  for (std::size_t i = 0; i < cohort.size(); ++i) any_event = any_event || (cohort[i].delta == 1 && omega[i] > 0.0);
  if (!any_event) fail(ErrorKind::validation, "no events with positive weight");
}

void finish(FitResult& fit, const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
            const SolveOptions& options) {
  const PsiValue pv = psi(cohort, omega, w, fit.theta_hat, fit.rho, options.policy);
  fit.psi_at_solution = pv.psi;
  fit.dropped_terms = pv.n_dropped;
  fit.scaled_norm = std::sqrt(static_cast<double>(cohort.size())) * pv.psi.norm();
  fit.above_threshold = fit.scaled_norm > options.tol_psi_scaled;
  if (fit.flat_region.empty()) fit.flat_region.resize(static_cast<std::size_t>(cohort.dim()));
}

FitResult solve_gehan_1d(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                         const SolveOptions& options) {
  FitResult fit;
  fit.rho = RhoKind::gehan;
  Vector theta(1);
  auto g = [&](double s) {
    theta[0] = s;
    const double v = psi(cohort, omega, w, theta, RhoKind::gehan, options.policy).psi[0];
    fit.trace.push_back({static_cast<int>(fit.trace.size()), theta, v});
    return v;
  };
  const MonotoneRoot r = leftmost_root(g, 0.0, options.search_radius, options.tol_theta, options.max_iter);
  fit.iterations = r.evaluations;
  fit.theta_hat = Vector::Constant(1, r.root);
  fit.flat_region.resize(1);
  if (r.degenerate) {
    fit.degenerate = true;
    fit.flat_region[0] = Interval{-kInf, kInf};
  } else if (r.plateau_hi - r.root > options.tol_theta) {
    fit.flat_region[0] = Interval{r.root, r.plateau_hi};
  }
  return fit;
}

Vector random_unit(CounterRng& rng, Eigen::Index d) {
  Vector v(d);
  for (Eigen::Index k = 0; k < d; ++k) v[k] = 2.0 * rng.uniform() - 1.0;
  const double nrm = v.norm();
  return nrm > 0.0 ? Vector(v / nrm) : Vector(Vector::Unit(d, 0));
}

FitResult solve_gehan_descent(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                              const SolveOptions& options) {
  const Eigen::Index d = cohort.dim();
  FitResult fit;
  fit.rho = RhoKind::gehan;
  Vector theta = Vector::Zero(d);
  double loss = gehan_loss(cohort, omega, w, theta);
  CounterRng rng(0x5eed, static_cast<std::uint64_t>(d));

  int stalled = 0;
  for (int sweep = 1;; ++sweep) {
    if (sweep > options.max_iter) fail(ErrorKind::numeric, "Gehan descent hit the iteration cap");
    const double before = loss;

    std::vector<Vector> dirs;
    for (Eigen::Index k = 0; k < d; ++k) dirs.push_back(Vector::Unit(d, k));
    const Vector sub = psi(cohort, omega, w, theta, RhoKind::gehan, options.policy).psi;
    if (sub.norm() > 0.0) dirs.push_back(-sub / sub.norm());
    for (Eigen::Index k = 0; k < d; ++k) dirs.push_back(random_unit(rng, d));

    for (const Vector& v : dirs) {
      auto g = [&](double s) {
        return psi(cohort, omega, w, Vector(theta + s * v), RhoKind::gehan, options.policy).psi.dot(v);
      };
      MonotoneRoot r;
      try {
        r = leftmost_root(g, 0.0, options.search_radius, options.tol_theta, options.max_iter);
      } catch (const Error&) {
        continue;  // loss flat toward -inf along v
      }
      fit.iterations += r.evaluations;
      if (r.degenerate || r.root == 0.0) continue;
      const Vector cand = theta + r.root * v;
      const double lc = gehan_loss(cohort, omega, w, cand);
      if (lc < loss) {
        theta = cand;
        loss = lc;
      }
    }
    fit.trace.push_back({sweep, theta, loss});
    stalled = (before - loss <= 1e-14 * std::max(1.0, before)) ? stalled + 1 : 0;
    if (stalled >= 3) break;
  }

  fit.theta_hat = theta;
  fit.flat_region.resize(static_cast<std::size_t>(d));
  if (loss == 0.0 && psi(cohort, omega, w, theta, RhoKind::gehan, options.policy).psi.isZero(0.0)) {
    // The loss is bounded below by zero; check whether it is identically zero.
    const Vector far = theta + Vector::Constant(d, options.search_radius);
    if (gehan_loss(cohort, omega, w, far) == 0.0) fit.degenerate = true;
  }
  return fit;
}

// Standard Nelder-Mead (reflection 1, expansion 2, contraction 0.5, shrink 0.5).
Vector nelder_mead(const std::function<double(const Vector&)>& f, const Vector& start, double step, double tol,
                   int max_iter, int& iterations, std::vector<TraceStep>& trace) {
  const Eigen::Index d = start.size();
  std::vector<Vector> x(static_cast<std::size_t>(d + 1), start);
  std::vector<double> fx(static_cast<std::size_t>(d + 1));
  for (Eigen::Index k = 0; k < d; ++k) x[static_cast<std::size_t>(k + 1)][k] += step;
  for (std::size_t k = 0; k < x.size(); ++k) fx[k] = f(x[k]);

  std::vector<std::size_t> idx(x.size());
  for (int it = 0;; ++it) {
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
    const std::size_t best = idx.front(), worst = idx.back(), second = idx[idx.size() - 2];
    trace.push_back({it, x[best], fx[best]});

    double spread = 0.0;
    for (const Vector& v : x) spread = std::max(spread, (v - x[best]).cwiseAbs().maxCoeff());
    if (spread <= tol) {
      iterations += it;
      return x[best];
    }
    if (it >= max_iter) fail(ErrorKind::numeric, "Nelder-Mead hit the iteration cap");

    Vector centroid = Vector::Zero(d);
    for (std::size_t k = 0; k < x.size(); ++k)
      if (k != worst) centroid += x[k];
    centroid /= static_cast<double>(d);

    const Vector xr = centroid + (centroid - x[worst]);
    const double fr = f(xr);
    if (fr < fx[best]) {
      const Vector xe = centroid + 2.0 * (centroid - x[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        x[worst] = xe;
        fx[worst] = fe;
      } else {
        x[worst] = xr;
        fx[worst] = fr;
      }
      continue;
    }
    if (fr < fx[second]) {
      x[worst] = xr;
      fx[worst] = fr;
      continue;
    }
    const bool outside = fr < fx[worst];
    const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid)) : Vector(centroid + 0.5 * (x[worst] - centroid));
    const double fc = f(xc);
    if (fc < (outside ? fr : fx[worst])) {
      x[worst] = xc;
      fx[worst] = fc;
      continue;
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (k == best) continue;
      x[k] = x[best] + 0.5 * (x[k] - x[best]);
      fx[k] = f(x[k]);
    }
  }
}

}  // namespace

void check_options(const SolveOptions& options) {
  if (!(options.tol_theta > 0.0) || !(options.tol_psi_scaled > 0.0))
    fail(ErrorKind::validation, "solver tolerances must be positive");
  if (options.max_iter < 1) fail(ErrorKind::validation, "max_iter must be at least 1");
  if (!(options.search_radius > 0.0)) fail(ErrorKind::validation, "search_radius must be positive");
  check_policy(options.policy);
}

double scaled_psi_norm(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                       const Vector& theta, RhoKind rho, const ValidationPolicy& policy) {
  return std::sqrt(static_cast<double>(cohort.size())) * psi(cohort, omega, w, theta, rho, policy).psi.norm();
}

MonotoneRoot leftmost_root(const std::function<double(double)>& g, double start, double radius, double tol,
                           int max_iter) {
  MonotoneRoot out;
  auto eval = [&](double s) {
    ++out.evaluations;
    return g(s);
  };

  double lo = start, hi = start, g_hi = 0.0;
  const double g0 = eval(start);
  double step = radius;
  if (g0 < 0.0) {
    bool found = false;
    for (int k = 0; k < kMaxExpansions && !found; ++k, step *= 2.0) {
      const double cand = start + step;
      const double gc = eval(cand);
      if (gc >= 0.0) {
        hi = cand;
        g_hi = gc;
        found = true;
      } else {
        lo = cand;
      }
    }
    if (!found) fail(ErrorKind::numeric, "no sign change within the expanded bracket");
  } else {
    g_hi = g0;
    bool found = false;
    double g_last = g0;
    for (int k = 0; k < kMaxExpansions && !found; ++k, step *= 2.0) {
      const double cand = start - step;
      const double gc = eval(cand);
      if (gc < 0.0) {
        lo = cand;
        found = true;
      } else {
        hi = cand;
        g_hi = gc;
        g_last = gc;
      }
    }
    if (!found) {
      if (g0 == 0.0 && g_last == 0.0 && eval(start + step) == 0.0) {
        out.degenerate = true;
        out.root = start;
        out.plateau_hi = kInf;
        return out;
      }
      fail(ErrorKind::numeric, "no sign change within the expanded bracket");
    }
  }

  for (int it = 0; hi - lo > tol; ++it) {
    if (it >= max_iter) fail(ErrorKind::numeric, "bisection hit the iteration cap");
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    const double gm = eval(mid);
    if (gm < 0.0) {
      lo = mid;
    } else {
      hi = mid;
      g_hi = gm;
    }
  }
  out.root = hi;
  out.plateau_hi = hi;
  if (g_hi != 0.0) return out;

  // Zero plateau: locate its right end inf{g > 0}.
  double plo = hi, phi = kInf;
  step = radius;
  for (int k = 0; k < kMaxExpansions; ++k, step *= 2.0) {
    const double cand = hi + step;
    if (eval(cand) > 0.0) {
      phi = cand;
      break;
    }
    plo = cand;
  }
  if (std::isfinite(phi)) {
    for (int it = 0; phi - plo > tol && it < max_iter; ++it) {
      const double mid = plo + 0.5 * (phi - plo);
      if (mid <= plo || mid >= phi) break;
      (eval(mid) > 0.0 ? phi : plo) = mid;
    }
  }
  out.plateau_hi = phi;
  return out;
}

FitResult solve_gehan(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                      const SolveOptions& options) {
  check_options(options);
  check_fit_inputs(cohort, omega, w);
  FitResult fit = cohort.dim() == 1 ? solve_gehan_1d(cohort, omega, w, options)
                                    : solve_gehan_descent(cohort, omega, w, options);
  finish(fit, cohort, omega, w, options);
  return fit;
}

FitResult solve_logrank(const Cohort& cohort, std::span<const double> omega, std::span<const double> w,
                        const SolveOptions& options, std::optional<Vector> seed_theta) {
  check_options(options);
  check_fit_inputs(cohort, omega, w);
  const Eigen::Index d = cohort.dim();

  FitResult fit;
  fit.rho = RhoKind::logrank;
  fit.flat_region.resize(static_cast<std::size_t>(d));

  Vector start;
  if (seed_theta) {
    if (seed_theta->size() != d) fail(ErrorKind::validation, "seed theta has the wrong dimension");
    start = *seed_theta;
  } else {
    try {
      start = solve_gehan(cohort, omega, w, options).theta_hat;
    } catch (const Error&) {
      start = Vector::Zero(d);
    }
  }

  auto f = [&](const Vector& t) { return psi(cohort, omega, w, t, RhoKind::logrank, options.policy).psi.squaredNorm(); };

  bool flat = f(start) == 0.0;
  for (Eigen::Index k = 0; k < d && flat; ++k) {
    flat = f(start + options.search_radius * Vector::Unit(d, k)) == 0.0 &&
           f(start - options.search_radius * Vector::Unit(d, k)) == 0.0;
  }
  if (flat) {
    fit.degenerate = true;
    fit.theta_hat = start;
    for (auto& r : fit.flat_region) r = Interval{-kInf, kInf};
    finish(fit, cohort, omega, w, options);
    return fit;
  }

  const double step = 0.1 * options.search_radius;
  const int cap = options.max_iter * static_cast<int>(d + 1);
  Vector best = nelder_mead(f, start, step, options.tol_theta, cap, fit.iterations, fit.trace);
  const Vector alt_start = start - Vector::Constant(d, step);
  std::vector<TraceStep> alt_trace;
  const Vector alt = nelder_mead(f, alt_start, step, options.tol_theta, cap, fit.iterations, alt_trace);
  double f_best = f(best);
  const double f_alt = f(alt);
  // Two approximate roots separated by a region where Psi is not small.
  const double n = static_cast<double>(cohort.size());
  auto is_root = [&](double fv) { return std::sqrt(n * fv) <= options.tol_psi_scaled; };
  if ((alt - best).cwiseAbs().maxCoeff() > options.tol_theta && is_root(f_best) && is_root(f_alt)) {
    for (double s : {0.25, 0.5, 0.75}) {
      if (!is_root(f(best + s * (alt - best)))) {
        fit.possibly_nonunique = true;
        break;
      }
    }
  }
  if (f_alt < f_best) {
    best = alt;
    f_best = f_alt;
  }

  // Coordinate-wise polish on a local grid.
  const double radius = 100.0 * options.tol_theta;
  constexpr int kGrid = 10;
  for (Eigen::Index k = 0; k < d; ++k) {
    const Vector centre = best;
    for (int j = -kGrid; j <= kGrid; ++j) {
      if (j == 0) continue;
      Vector cand = centre;
      cand[k] += radius * static_cast<double>(j) / kGrid;
      const double fc = f(cand);
      if (fc < f_best) {
        best = cand;
        f_best = fc;
      }
    }
  }
  fit.trace.push_back({static_cast<int>(fit.trace.size()), best, f_best});
  fit.theta_hat = best;
  finish(fit, cohort, omega, w, options);
  return fit;
}

FitResult solve(const Cohort& cohort, std::span<const double> omega, std::span<const double> w, RhoKind rho,
                const SolveOptions& options) {
  return rho == RhoKind::gehan ? solve_gehan(cohort, omega, w, options) : solve_logrank(cohort, omega, w, options);
}

}  // namespace aftcc
