#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "ma/geometry.hpp"
#include "ma/grid.hpp"
#include "ma/interp.hpp"
#include "ma/ma_operators.hpp"
#include "ma/numerics.hpp"

namespace ma {

// ---------------------------------------------------------------------------
// Dirichlet solver: det D^2 u = f on a box (or masked box), u = g elsewhere
// ---------------------------------------------------------------------------

enum class Scheme { central, monotone };

struct SolverOptions {
  double tol = 1e-8;
  int max_iters = 50;
  double damping = 0.5;                  // line-search shrink factor
  std::optional<double> pinch_sigma;     // asserted bounds 1/sigma <= f <= sigma
  double linear_tol = 1e-12;
  int linear_max_iters = 40000;
  int monotone_width = 2;
  long monotone_max_sweeps = 400000;
};

struct ConvexSolution {
  GridFunction u;
  double residual_sup = 0.0;
  int newton_iters = 0;
  Scheme scheme = Scheme::central;
};

namespace detail {

struct DirichletSystem {
  const GridSpec* spec = nullptr;
  std::vector<long> unknowns;        // flat node indices
  std::vector<long> unknown_of;      // node -> unknown index or -1
  int nsx = 0;

  static DirichletSystem build(const GridSpec& spec, const Region* active) {
    if (spec.periodic()) throw spec_mismatch_error("solve_dirichlet: box grids only");
    DirichletSystem sys;
    sys.spec = &spec;
    sys.nsx = spec.nodes_x();
    sys.unknown_of.assign(spec.node_count(), -1);
    const Region inner = Region::interior(spec, 1);
    auto add = [&](int i, int j) {
      const long node = static_cast<long>(j) * sys.nsx + i;
      sys.unknown_of[node] = static_cast<long>(sys.unknowns.size());
      sys.unknowns.push_back(node);
    };
    if (active) {
      if (!(active->spec() == spec))
        throw spec_mismatch_error("solve_dirichlet: active region on a different grid");
      if (active->boundary_margin() < 1)
        throw parameter_error("solve_dirichlet: active region must keep a 1-node margin");
      active->for_each(add);
    } else {
      inner.for_each(add);
    }
    if (sys.unknowns.empty()) throw parameter_error("solve_dirichlet: no unknowns");
    return sys;
  }

  int i_of(long node) const { return static_cast<int>(node % nsx); }
  int j_of(long node) const { return static_cast<int>(node / nsx); }
};

inline double central_det_at(const GridFunction& u, int i, int j, double inv_h2) {
  const double c = u.at(i, j);
  const double uxx = (u.at(i + 1, j) - 2 * c + u.at(i - 1, j)) * inv_h2;
  const double uyy = (u.at(i, j + 1) - 2 * c + u.at(i, j - 1)) * inv_h2;
  const double uxy =
      (u.at(i + 1, j + 1) - u.at(i + 1, j - 1) - u.at(i - 1, j + 1) + u.at(i - 1, j - 1)) *
      0.25 * inv_h2;
  return uxx * uyy - uxy * uxy;
}

}  // namespace detail

// Monotone wide-stencil solve by nonlinear Gauss-Seidel: each local update is
// the exact root of the one-node equation, taken as the minimum over the
// direction pairs. Used as cross-check and as the fallback scheme.
inline ConvexSolution solve_dirichlet_monotone(const GridFunction& f, const GridFunction& g,
                                               const SolverOptions& opts = {},
                                               const Region* active = nullptr,
                                               const GridFunction* warm_start = nullptr) {
  f.require_same_spec(g, "solve_dirichlet_monotone");
  const GridSpec& spec = f.spec();
  const auto sys = detail::DirichletSystem::build(spec, active);
  const auto pairs = monotone_pairs(opts.monotone_width);
  const int need_margin = monotone_margin(opts.monotone_width);
  for (long node : sys.unknowns) {
    const int i = sys.i_of(node), j = sys.j_of(node);
    if (i < need_margin || j < need_margin || i >= spec.nodes_x() - need_margin ||
        j >= spec.nodes_y() - need_margin)
      throw parameter_error("solve_dirichlet_monotone: stencil width exceeds active margin");
    if (f.at(i, j) <= 0.0)
      throw ellipticity_error("solve_dirichlet_monotone: f must be positive");
  }

  GridFunction u = warm_start ? *warm_start : g;
  const double h = spec.spacing();
  const double d0 = kDegeneracyFloor;

  // Root of max((a1 - t)/s1, d0) * max((a2 - t)/s2, d0) = fval in t = 2u.
  auto pair_root = [&](double a1, double s1, double a2, double s2, double fval) {
    const double c = fval * s1 * s2;
    const double disc = (a1 - a2) * (a1 - a2) + 4.0 * c;
    double t = 0.5 * ((a1 + a2) - std::sqrt(disc));
    if ((a1 - t) / s1 >= d0 && (a2 - t) / s2 >= d0) return t;
    if (fval <= d0 * d0) return std::max(a1 - s1 * d0, a2 - s2 * d0);
    // One factor floored at d0; the other carries the full value.
    const double t1 = a2 - s2 * (fval / d0);  // first factor floored
    if ((a1 - t1) / s1 <= d0) return t1;
    return a1 - s1 * (fval / d0);
  };

  auto local_update = [&](int i, int j) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : pairs) {
      const double s1 = (p.e1x * p.e1x + p.e1y * p.e1y) * h * h;
      const double s2 = (p.e2x * p.e2x + p.e2y * p.e2y) * h * h;
      const double a1 = u.at(i + p.e1x, j + p.e1y) + u.at(i - p.e1x, j - p.e1y);
      const double a2 = u.at(i + p.e2x, j + p.e2y) + u.at(i - p.e2x, j - p.e2y);
      best = std::min(best, pair_root(a1, s1, a2, s2, f.at(i, j)));
    }
    return 0.5 * best;
  };

  auto residual_sup = [&]() {
    const GridFunction mono = ma_monotone(u, opts.monotone_width);
    double sup = 0.0;
    for (long node : sys.unknowns) {
      const int i = sys.i_of(node), j = sys.j_of(node);
      sup = std::max(sup, std::abs(mono.at(i, j) - f.at(i, j)));
    }
    return sup;
  };

  double res = residual_sup();
  for (long sweep = 0; sweep < opts.monotone_max_sweeps; ++sweep) {
    // Alternate sweep direction; helps information propagate both ways.
    if (sweep % 2 == 0) {
      for (long node : sys.unknowns) u.at(sys.i_of(node), sys.j_of(node)) = local_update(sys.i_of(node), sys.j_of(node));
    } else {
      for (auto it = sys.unknowns.rbegin(); it != sys.unknowns.rend(); ++it)
        u.at(sys.i_of(*it), sys.j_of(*it)) = local_update(sys.i_of(*it), sys.j_of(*it));
    }
    if (sweep % 16 == 15 || sweep + 1 == opts.monotone_max_sweeps) {
      res = residual_sup();
      if (res <= opts.tol) return ConvexSolution{std::move(u), res, static_cast<int>(sweep + 1), Scheme::monotone};
    }
  }
  throw no_convergence_error("solve_dirichlet_monotone: sweep budget exhausted", res,
                             static_cast<int>(opts.monotone_max_sweeps));
}

// Damped Newton on the central discretization. Initialization is the Poisson
// solve Lap u0 = 2 sqrt(f) with the same boundary data (AM-GM heuristic:
// det D^2 u <= (Lap u / 2)^2 in 2D). Steps that would leave the discretely
// convex branch are shortened; after two consecutive shortenings the solve
// falls back to the monotone scheme.
inline ConvexSolution solve_dirichlet(const GridFunction& f, const GridFunction& g,
                                      const SolverOptions& opts = {},
                                      const Region* active = nullptr) {
  f.require_same_spec(g, "solve_dirichlet");
  const GridSpec& spec = f.spec();
  const auto sys = detail::DirichletSystem::build(spec, active);
  const long n = static_cast<long>(sys.unknowns.size());
  const double h = spec.spacing();
  const double inv_h2 = 1.0 / (h * h);

  for (long node : sys.unknowns) {
    const double fv = f.values()[node];
    if (fv <= 0.0) throw ellipticity_error("solve_dirichlet: f must be positive");
    if (opts.pinch_sigma) {
      const double sigma = *opts.pinch_sigma;
      if (sigma < 1.0) throw parameter_error("solve_dirichlet: pinch sigma must be >= 1");
      if (fv < 1.0 / sigma || fv > sigma)
        throw ellipticity_error("solve_dirichlet: f violates the pinching bounds");
    }
  }

  GridFunction u = g;

  // Coefficients of the linearization cof(D^2 u):D^2 delta, frozen per iterate.
  std::vector<double> cxx(n), cyy(n), cxy(n), diag(n);
  auto assemble = [&](bool laplacian) {
    for (long k = 0; k < n; ++k) {
      const long node = sys.unknowns[k];
      const int i = sys.i_of(node), j = sys.j_of(node);
      if (laplacian) {
        cxx[k] = 1.0;
        cyy[k] = 1.0;
        cxy[k] = 0.0;
      } else {
        const double c = u.at(i, j);
        const double uxx = (u.at(i + 1, j) - 2 * c + u.at(i - 1, j)) * inv_h2;
        const double uyy = (u.at(i, j + 1) - 2 * c + u.at(i, j - 1)) * inv_h2;
        const double uxy = (u.at(i + 1, j + 1) - u.at(i + 1, j - 1) - u.at(i - 1, j + 1) +
                            u.at(i - 1, j - 1)) *
                           0.25 * inv_h2;
        cxx[k] = uyy;   // coefficient of delta_xx
        cyy[k] = uxx;   // coefficient of delta_yy
        cxy[k] = -2.0 * uxy;
      }
      diag[k] = -2.0 * (cxx[k] + cyy[k]) * inv_h2;
      if (std::abs(diag[k]) < 1e-300) diag[k] = 1.0;
    }
  };

  auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
    auto val = [&](int i, int j) {
      const long node = static_cast<long>(j) * sys.nsx + i;
      const long k = sys.unknown_of[node];
      return k >= 0 ? in[static_cast<std::size_t>(k)] : 0.0;
    };
    for (long k = 0; k < n; ++k) {
      const long node = sys.unknowns[k];
      const int i = sys.i_of(node), j = sys.j_of(node);
      const double ctr = in[static_cast<std::size_t>(k)];
      const double dxx = (val(i + 1, j) - 2 * ctr + val(i - 1, j)) * inv_h2;
      const double dyy = (val(i, j + 1) - 2 * ctr + val(i, j - 1)) * inv_h2;
      const double dxy =
          (val(i + 1, j + 1) - val(i + 1, j - 1) - val(i - 1, j + 1) + val(i - 1, j - 1)) *
          0.25 * inv_h2;
      out[static_cast<std::size_t>(k)] = cxx[k] * dxx + cxy[k] * dxy + cyy[k] * dyy;
    }
  };

  auto residual = [&](const GridFunction& w, std::vector<double>& out) {
    double sup = 0.0;
    for (long k = 0; k < n; ++k) {
      const long node = sys.unknowns[k];
      const int i = sys.i_of(node), j = sys.j_of(node);
      const double r = detail::central_det_at(w, i, j, inv_h2) - f.at(i, j);
      out[static_cast<std::size_t>(k)] = r;
      sup = std::max(sup, std::abs(r));
    }
    return sup;
  };

  auto convex_on_unknowns = [&](const GridFunction& w) {
    const double tol = convexity_tolerance(w);
    for (long node : sys.unknowns) {
      const int i = sys.i_of(node), j = sys.j_of(node);
      static constexpr int dirs[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
      for (auto& d : dirs) {
        if (second_difference(w, i, j, d[0], d[1]) < -tol) return false;
      }
    }
    return true;
  };

  // Poisson initialization.
  {
    assemble(true);
    std::vector<double> b(n);
    for (long k = 0; k < n; ++k) {
      const long node = sys.unknowns[k];
      const int i = sys.i_of(node), j = sys.j_of(node);
      // Lap on the current u (which holds only boundary data inside) gives the
      // boundary coupling; move it to the right-hand side.
      const double lap_g = (u.at(i + 1, j) + u.at(i - 1, j) + u.at(i, j + 1) + u.at(i, j - 1) -
                            4.0 * u.at(i, j)) *
                           inv_h2;
      b[static_cast<std::size_t>(k)] = 2.0 * std::sqrt(f.at(i, j)) - lap_g;
    }
    // Solve Lap (u - g_ext) = rhs with zero boundary.
    std::vector<double> x;
    bicgstab(apply, b, x, opts.linear_tol, opts.linear_max_iters, diag);
    for (long k = 0; k < n; ++k) u.values()[sys.unknowns[k]] += x[static_cast<std::size_t>(k)];
  }

  std::vector<double> res(n), trial_res(n);
  double res_sup = residual(u, res);
  int shortened_in_a_row = 0;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    if (res_sup <= opts.tol)
      return ConvexSolution{std::move(u), res_sup, iter, Scheme::central};
    assemble(false);
    std::vector<double> b(n);
    for (long k = 0; k < n; ++k) b[static_cast<std::size_t>(k)] = -res[static_cast<std::size_t>(k)];
    std::vector<double> delta;
    const KrylovResult kr = bicgstab(apply, b, delta, opts.linear_tol, opts.linear_max_iters, diag);

    bool accepted = false;
    bool convexity_shortened = false;  // the projection event
    if (kr.converged || kr.residual < 1e-6) {
      double alpha = 1.0;
      for (int cut = 0; cut < 30; ++cut) {
        GridFunction trial = u;
        for (long k = 0; k < n; ++k)
          trial.values()[sys.unknowns[k]] += alpha * delta[static_cast<std::size_t>(k)];
        if (!convex_on_unknowns(trial)) {
          convexity_shortened = true;
          alpha *= opts.damping;
          continue;
        }
        const double trial_sup = residual(trial, trial_res);
        if (trial_sup <= res_sup * (1.0 - 1e-4 * alpha) || trial_sup <= opts.tol) {
          u = std::move(trial);
          std::swap(res, trial_res);
          res_sup = trial_sup;
          accepted = true;
          break;
        }
        alpha *= opts.damping;
      }
    }
    if (accepted) {
      shortened_in_a_row = convexity_shortened ? shortened_in_a_row + 1 : 0;
      if (shortened_in_a_row < 2) continue;
    }
    // Two consecutive projections (or a dead line search / stalled linear
    // solve): hand the iterate to the monotone scheme.
    SolverOptions mono = opts;
    ConvexSolution sol = solve_dirichlet_monotone(f, g, mono, active, &u);
    sol.newton_iters += iter;
    return sol;
  }
  throw no_convergence_error("solve_dirichlet: Newton stagnation", res_sup, opts.max_iters);
}

// ---------------------------------------------------------------------------
// Invariance checks
// ---------------------------------------------------------------------------

struct AffineMap {
  double a11 = 1, a12 = 0, a21 = 0, a22 = 1;
  double b1 = 0, b2 = 0;

  double det() const { return a11 * a22 - a12 * a21; }
  Vec2 apply(double x, double y) const { return {a11 * x + a12 * y + b1, a21 * x + a22 * y + b2}; }
  double norm2() const {
    // Spectral norm of the linear part.
    const double s = a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22;
    const double d = a11 * a22 - a12 * a21;
    const double rad = std::sqrt(std::max(0.0, s * s - 4.0 * d * d));
    return std::sqrt(0.5 * (s + rad));
  }

  static AffineMap identity() { return {}; }
  static AffineMap translation(double tx, double ty) { return {1, 0, 0, 1, tx, ty}; }
  // Rotation about a fixed point.
  static AffineMap rotation(double theta, double cx, double cy) {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c, -s, s, c, cx - c * cx + s * cy, cy - s * cx - c * cy};
  }
  // x' = x + k (y - cy), y' = y.
  static AffineMap shear(double k, double cy) { return {1, k, 0, 1, -k * cy, 0}; }
  // R(t1) diag(s, 1/s) R(t2) about a center: volume preserving by construction.
  static AffineMap random_volume_preserving(Rng& rng, double cx, double cy,
                                            double max_log_stretch = 0.2,
                                            double max_shift = 0.05) {
    const double t1 = rng.uniform(0, 2 * M_PI), t2 = rng.uniform(0, 2 * M_PI);
    const double s = std::exp(rng.uniform(-max_log_stretch, max_log_stretch));
    const double c1 = std::cos(t1), s1 = std::sin(t1), c2 = std::cos(t2), s2 = std::sin(t2);
    AffineMap m;
    m.a11 = c1 * s * c2 - s1 * (1 / s) * s2;
    m.a12 = -c1 * s * s2 - s1 * (1 / s) * c2;
    m.a21 = s1 * s * c2 + c1 * (1 / s) * s2;
    m.a22 = -s1 * s * s2 + c1 * (1 / s) * c2;
    // Fix the center, then jitter.
    const Vec2 at = m.apply(cx, cy);
    m.b1 = cx - at.x + rng.uniform(-max_shift, max_shift);
    m.b2 = cy - at.y + rng.uniform(-max_shift, max_shift);
    return m;
  }
};

struct InvarianceReport {
  double residual_sup = 0.0;
  double tol_inv = 0.0;
  bool pass = false;
  long sample_nodes = 0;
};

// Scheme constant for tol_inv = tol + c * h^2 |A|^2: covers the O(h^2)
// discretization of the composed Hessian plus the quartic interpolation error
// pushed through two difference quotients. Calibrated on the manufactured
// exponential solution with a factor ~4 margin.
inline constexpr double kInvarianceConstant = 60.0;

namespace detail {

// Composes s with the affine map via quartic-accurate sampling and measures
// sup |det D^2 (u o A) - rhs o A| over the nodes where everything is defined.
inline InvarianceReport composed_residual(const GridFunction& u, const GridFunction& f,
                                          const AffineMap& A, double scale_back, double solver_tol,
                                          double c_inv) {
  const GridSpec& spec = u.spec();
  const CubicSampler su(u);
  const CubicSampler sf(f);
  const int nsx = spec.nodes_x(), nsy = spec.nodes_y();
  GridFunction w(spec);
  std::vector<std::uint8_t> ok(spec.node_count(), 0);
  for (int j = 0; j < nsy; ++j)
    for (int i = 0; i < nsx; ++i) {
      const Vec2 p = A.apply(spec.x(i), spec.y(j));
      if (su.contains(p.x, p.y)) {
        w.at(i, j) = scale_back * su(p.x, p.y);
        ok[static_cast<std::size_t>(j) * nsx + i] = 1;
      }
    }
  const double h = spec.spacing();
  const double inv_h2 = 1.0 / (h * h);
  InvarianceReport report;
  report.tol_inv = solver_tol + c_inv * h * h * A.norm2() * A.norm2();
  for (int j = 1; j < nsy - 1; ++j)
    for (int i = 1; i < nsx - 1; ++i) {
      bool all = true;
      for (int dj = -1; dj <= 1 && all; ++dj)
        for (int di = -1; di <= 1 && all; ++di)
          all = ok[static_cast<std::size_t>(j + dj) * nsx + (i + di)] != 0;
      if (!all) continue;
      const Vec2 p = A.apply(spec.x(i), spec.y(j));
      const double rhs = sf(p.x, p.y);
      report.residual_sup =
          std::max(report.residual_sup, std::abs(central_det_at(w, i, j, inv_h2) - rhs));
      ++report.sample_nodes;
    }
  if (report.sample_nodes == 0)
    throw parameter_error("invariance check: no interior region remains under the map");
  report.pass = report.residual_sup <= report.tol_inv;
  return report;
}

}  // namespace detail

inline InvarianceReport check_affine_invariance(const ConvexSolution& sol, const GridFunction& f,
                                                const AffineMap& A, double solver_tol = 1e-8,
                                                double c_inv = kInvarianceConstant) {
  if (std::abs(A.det() - 1.0) > 1e-12)
    throw parameter_error("check_affine_invariance: A must have determinant 1");
  return detail::composed_residual(sol.u, f, A, 1.0, solver_tol, c_inv);
}

inline InvarianceReport check_quadratic_dilation(const ConvexSolution& sol, const GridFunction& f,
                                                 double t, double solver_tol = 1e-8,
                                                 double c_inv = kInvarianceConstant) {
  if (!(t > 0.0)) throw parameter_error("check_quadratic_dilation: t must be positive");
  AffineMap A;
  A.a11 = A.a22 = t;
  return detail::composed_residual(sol.u, f, A, 1.0 / (t * t), solver_tol, c_inv);
}

// ---------------------------------------------------------------------------
// Slices, strict convexity probe and section normalization
// ---------------------------------------------------------------------------

struct AffineFunction {
  double c0 = 0, cx = 0, cy = 0;
  double operator()(double x, double y) const { return c0 + cx * x + cy * y; }
};

struct SliceSection {
  AffineFunction plane;
  std::optional<Region> section;  // nodes with u < l
  bool compactly_contained = false;
};

struct GrowthRing {
  double radius = 0.0;      // achieved radius of the maximizing node
  double separation = 0.0;  // max of u - supporting plane on the ring
};

struct GrowthReport {
  SliceSection slice;
  bool has_exponent = false;
  double beta = 0.0;
  std::vector<GrowthRing> rings;
  double contact_x = 0.0, contact_y = 0.0;
};

// Cuts the slice {u < l}, finds the contact point of u with its supporting
// plane inside, and fits the polynomial separation exponent over dyadic rings.
// Sections reaching the boundary margin come back flagged, without a growth
// claim.
inline GrowthReport strict_convexity_probe(const ConvexSolution& sol, const AffineFunction& l,
                                           double min_fit_radius = 0.0) {
  const GridFunction& u = sol.u;
  const GridSpec& spec = u.spec();
  const int nsx = spec.nodes_x(), nsy = spec.nodes_y();
  const double h = spec.spacing();

  std::vector<std::uint8_t> in_section(spec.node_count(), 0);
  long count = 0;
  bool touches_margin = false;
  for (int j = 0; j < nsy; ++j)
    for (int i = 0; i < nsx; ++i) {
      if (u.at(i, j) < l(spec.x(i), spec.y(j))) {
        in_section[static_cast<std::size_t>(j) * nsx + i] = 1;
        ++count;
        if (i < 2 || j < 2 || i >= nsx - 2 || j >= nsy - 2) touches_margin = true;
      }
    }
  if (count == 0) throw parameter_error("strict_convexity_probe: empty section");

  GrowthReport report;
  report.slice.plane = l;
  report.slice.section =
      Region::where(spec, [&](int i, int j) { return in_section[static_cast<std::size_t>(j) * nsx + i] != 0; });
  report.slice.compactly_contained = !touches_margin;
  if (touches_margin) return report;

  // Contact point: minimizer of u - l inside the section.
  int ci = -1, cj = -1;
  double best = std::numeric_limits<double>::infinity();
  report.slice.section->for_each([&](int i, int j) {
    const double v = u.at(i, j) - l(spec.x(i), spec.y(j));
    if (v < best) {
      best = v;
      ci = i;
      cj = j;
    }
  });
  report.contact_x = spec.x(ci);
  report.contact_y = spec.y(cj);

  const double gx = (u.at(ci + 1, cj) - u.at(ci - 1, cj)) / (2 * h);
  const double gy = (u.at(ci, cj + 1) - u.at(ci, cj - 1)) / (2 * h);
  const double u0 = u.at(ci, cj);
  auto plane = [&](double x, double y) {
    return u0 + gx * (x - report.contact_x) + gy * (y - report.contact_y);
  };

  for (double r = 2 * h;; r *= 2) {
    GrowthRing ring;
    bool inside_section = true;
    bool any = false;
    for (int j = 0; j < nsy; ++j)
      for (int i = 0; i < nsx; ++i) {
        const double dx = spec.x(i) - report.contact_x, dy = spec.y(j) - report.contact_y;
        const double dist = std::hypot(dx, dy);
        if (std::abs(dist - r) > 0.5 * h) continue;
        any = true;
        if (!report.slice.section->contains(i, j)) {
          inside_section = false;
          break;
        }
        const double sep = u.at(i, j) - plane(spec.x(i), spec.y(j));
        if (sep > ring.separation) {
          ring.separation = sep;
          ring.radius = dist;
        }
      }
    if (!any || !inside_section) break;
    if (ring.separation > 0.0 && ring.radius >= min_fit_radius) report.rings.push_back(ring);
    if (r > 1.0) break;
  }

  if (report.rings.size() >= 3) {
    std::vector<double> lr, ls;
    for (const auto& ring : report.rings) {
      lr.push_back(std::log(ring.radius));
      ls.push_back(std::log(ring.separation));
    }
    report.beta = fit_line(lr, ls).slope;
    report.has_exponent = true;
  }
  return report;
}

// Affine normalization of a compactly contained section: the Loewner ellipse
// of the node hull is mapped to the unit ball, then dilated so the image
// contains B_1; John's theorem keeps the image inside B_2.
inline AffineMap normalize_section(const SliceSection& s) {
  if (!s.compactly_contained || !s.section)
    throw parameter_error("normalize_section: section must be compactly contained");
  const Region& region = *s.section;
  const GridSpec& spec = region.spec();
  std::vector<Vec2> pts;
  pts.reserve(region.count());
  region.for_each([&](int i, int j) { pts.push_back({spec.x(i), spec.y(j)}); });
  const std::vector<Vec2> hull = convex_hull(pts);
  if (hull.size() < 3 || polygon_area(hull) < 1e-14)
    throw parameter_error("normalize_section: degenerate section");

  const Ellipse e = min_enclosing_ellipse(hull);
  const Sym2 E{e.exx, e.exy, e.eyy};
  if (!(E.lambda_min() > 0.0)) throw parameter_error("normalize_section: degenerate ellipse");
  // Symmetric square root of E: unique, deterministic, and the identity for a
  // unit-ball section. sqrt(M) = (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M)).
  const double sd = std::sqrt(E.det());
  const double denom = std::sqrt(E.trace() + 2.0 * sd);
  AffineMap A;
  A.a11 = (E.xx + sd) / denom;
  A.a12 = E.xy / denom;
  A.a21 = E.xy / denom;
  A.a22 = (E.yy + sd) / denom;
  A.b1 = -(A.a11 * e.center.x + A.a12 * e.center.y);
  A.b2 = -(A.a21 * e.center.x + A.a22 * e.center.y);

  std::vector<Vec2> mapped;
  mapped.reserve(hull.size());
  for (const Vec2& p : hull) mapped.push_back(A.apply(p.x, p.y));
  const double rho = polygon_inradius(convex_hull(mapped), {0.0, 0.0});
  if (!(rho > 1e-12)) throw parameter_error("normalize_section: degenerate section");
  const double scale = 1.0 / rho;
  A.a11 *= scale;
  A.a12 *= scale;
  A.a21 *= scale;
  A.a22 *= scale;
  A.b1 *= scale;
  A.b2 *= scale;
  return A;
}

}  // namespace ma
