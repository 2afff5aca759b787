#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "ma/grid.hpp"
#include "ma/ma_operators.hpp"
#include "ma/numerics.hpp"
#include "ma/parallel.hpp"

namespace ma {

// Damped Newton for periodic Monge-Ampere problems
//
//     W(x + grad v) * det(M + D^2 v) = rhs,   v periodic, mean zero,
//
// with the determinant in the diagonal split form (ma_operators.hpp), whose
// grid average is pinned to det M. A scalar Lagrange multiplier keeps each
// linearized system solvable when the data are (slightly) incompatible; the
// multiplier never touches v itself, so genuine incompatibility surfaces as a
// residual floor instead of a wrong answer.

struct PeriodicOptions {
  double tol = 1e-9;               // sup-norm residual target
  int max_iters = 50;
  double damping = 0.5;            // line-search shrink factor
  double positivity_floor = 1e-8;  // min eigenvalue of M + D^2 v along the path
  double linear_tol = 1e-12;
  int linear_max_iters = 40000;
  bool poisson_init = true;        // start from the linearized solve (else zero)
};

struct PeriodicResult {
  GridFunction v;
  double residual_sup = 0.0;
  int newton_iters = 0;
};

// Coefficient that is identically one (plain det(M + D^2 v) = rhs problems).
struct UnitWeight {
  static constexpr bool unit = true;
  double value(double, double) const { return 1.0; }
  void gradient(double, double, double& wx, double& wy) const { wx = wy = 0.0; }
};

namespace detail {

struct PeriodicWorkspace {
  std::vector<double> weight, det, dd1, dd2, diag_diff, wgx, wgy, diag;
  void resize(std::size_t n) {
    weight.assign(n, 1.0);
    det.assign(n, 0.0);
    dd1.assign(n, 0.0);
    dd2.assign(n, 0.0);
    diag_diff.assign(n, 0.0);
    wgx.assign(n, 0.0);
    wgy.assign(n, 0.0);
    diag.assign(n + 1, 1.0);
  }
};

inline void subtract_mean(GridFunction& v) {
  const double m = v.mean();
  for (double& x : v.values()) x -= m;
}

inline double min_shifted_eigenvalue(const GridFunction& v, const Sym2& m) {
  const HessianField H = hessian_central(v);
  const GridSpec& s = v.spec();
  double lo = std::numeric_limits<double>::infinity();
  for (int j = 0; j < s.nodes_y(); ++j)
    for (int i = 0; i < s.nodes_x(); ++i) {
      const Sym2 e = H.entry(i, j);
      lo = std::min(lo, Sym2{m.xx + e.xx, m.xy + e.xy, m.yy + e.yy}.lambda_min());
    }
  return lo;
}

}  // namespace detail

// Residual field W(x + grad v) det(M + D^2 v) - rhs on the torus.
template <class Weight>
GridFunction periodic_residual(const GridFunction& v, const Sym2& m, const GridFunction& rhs,
                               const Weight& weight) {
  const GridSpec& s = v.spec();
  GridFunction out(s);
  const double inv2h = 0.5 / s.spacing();
  const int nsx = s.nodes_x(), nsy = s.nodes_y();
  parallel_for(static_cast<long>(nsy), [&](long jlo, long jhi) {
    for (long jj = jlo; jj < jhi; ++jj) {
      const int j = static_cast<int>(jj);
      for (int i = 0; i < nsx; ++i) {
        const SplitStencil st = split_stencil(v, i, j);
        double w = 1.0;
        if constexpr (!Weight::unit) {
          const double gx = (v.wrap(i + 1, j) - v.wrap(i - 1, j)) * inv2h;
          const double gy = (v.wrap(i, j + 1) - v.wrap(i, j - 1)) * inv2h;
          w = weight.value(s.x(i) + gx, s.y(j) + gy);
        }
        out.at(i, j) = w * st.det_shifted(m) - rhs.at(i, j);
      }
    }
  });
  return out;
}

template <class Weight>
PeriodicResult solve_periodic_ma(const GridFunction& rhs, const Sym2& m, const Weight& weight,
                                 const PeriodicOptions& opts = {},
                                 const GridFunction* warm_start = nullptr) {
  const GridSpec& s = rhs.spec();
  if (!s.periodic()) throw spec_mismatch_error("solve_periodic_ma: needs a torus grid");
  const int nsx = s.nodes_x(), nsy = s.nodes_y();
  const long n = s.node_count();
  const double h = s.spacing();
  const double inv_h2 = 1.0 / (h * h);
  const double inv_2h2 = 0.5 * inv_h2;
  const double inv_4h2 = 0.25 * inv_h2;
  const double inv2h = 0.5 / h;

  auto idx = [nsx](int i, int j) { return static_cast<std::size_t>(j) * nsx + i; };
  auto wrap_idx = [&](int i, int j) {
    return idx(wrap_index(i, nsx), wrap_index(j, nsy));
  };

  GridFunction v = warm_start ? *warm_start : GridFunction(s);
  if (warm_start && !(warm_start->spec() == s))
    throw spec_mismatch_error("solve_periodic_ma: warm start on a different grid");
  detail::subtract_mean(v);

  detail::PeriodicWorkspace ws;
  ws.resize(static_cast<std::size_t>(n));

  // Assemble the frozen coefficient grids for the current iterate.
  auto assemble = [&](const GridFunction& u) {
    parallel_for(static_cast<long>(nsy), [&](long jlo, long jhi) {
      for (long jj = jlo; jj < jhi; ++jj) {
        const int j = static_cast<int>(jj);
        for (int i = 0; i < nsx; ++i) {
          const std::size_t k = idx(i, j);
          const SplitStencil st = split_stencil(u, i, j);
          ws.dd1[k] = st.dd1;
          ws.dd2[k] = st.dd2;
          ws.diag_diff[k] = st.dxx - st.dyy;
          ws.det[k] = st.det_shifted(m);
          if constexpr (!Weight::unit) {
            const double gx = (u.wrap(i + 1, j) - u.wrap(i - 1, j)) * inv2h;
            const double gy = (u.wrap(i, j + 1) - u.wrap(i, j - 1)) * inv2h;
            const double px = s.x(i) + gx, py = s.y(j) + gy;
            ws.weight[k] = weight.value(px, py);
            weight.gradient(px, py, ws.wgx[k], ws.wgy[k]);
          }
          // Diagonal of the linearized operator, used as Jacobi scaling.
          const double d =
              ws.weight[k] * (-2.0 * (m.xx + m.yy) * inv_h2 - (ws.dd1[k] + ws.dd2[k]) * inv_h2);
          ws.diag[k] = std::abs(d) > 1e-300 ? d : 1.0;
        }
      }
    });
    ws.diag[n] = 1.0;
  };

  // Linearized operator on (delta, c): rows are
  //   W [cof(M):D^2 d + dSplit(v)[d]] + det * (grad W . grad d) + c,
  // plus the mean-zero constraint row.
  auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
    const double c = in[static_cast<std::size_t>(n)];
    parallel_for(static_cast<long>(nsy), [&](long jlo, long jhi) {
      for (long jj = jlo; jj < jhi; ++jj) {
        const int j = static_cast<int>(jj);
        for (int i = 0; i < nsx; ++i) {
          const std::size_t k = idx(i, j);
          const double ctr = in[k];
          const double e = in[wrap_idx(i + 1, j)], w_ = in[wrap_idx(i - 1, j)];
          const double nn = in[wrap_idx(i, j + 1)], ss = in[wrap_idx(i, j - 1)];
          const double ne = in[wrap_idx(i + 1, j + 1)], sw = in[wrap_idx(i - 1, j - 1)];
          const double nw = in[wrap_idx(i - 1, j + 1)], se = in[wrap_idx(i + 1, j - 1)];
          const double dxx = (e - 2.0 * ctr + w_) * inv_h2;
          const double dyy = (nn - 2.0 * ctr + ss) * inv_h2;
          const double dxy = (ne - se - nw + sw) * inv_4h2;
          const double dd1 = (ne - 2.0 * ctr + sw) * inv_2h2;
          const double dd2 = (se - 2.0 * ctr + nw) * inv_2h2;
          const double cof_term = m.yy * dxx - 2.0 * m.xy * dxy + m.xx * dyy;
          const double split_term = ws.dd1[k] * dd2 + ws.dd2[k] * dd1 -
                                    0.5 * ws.diag_diff[k] * (dxx - dyy);
          double val = ws.weight[k] * (cof_term + split_term) + c;
          if constexpr (!Weight::unit) {
            const double dx = (e - w_) * inv2h;
            const double dy = (nn - ss) * inv2h;
            val += ws.det[k] * (ws.wgx[k] * dx + ws.wgy[k] * dy);
          }
          out[k] = val;
        }
      }
    });
    double mean = 0.0;
    for (long k = 0; k < n; ++k) mean += in[static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(n)] = mean / static_cast<double>(n);
  };

  auto sup_norm = [&](const GridFunction& f) {
    double sup = 0.0;
    for (double x : f.values()) sup = std::max(sup, std::abs(x));
    return sup;
  };

  // Optional linearized start: W0 (det M + cof(M):D^2 v) ~ rhs.
  if (!warm_start && opts.poisson_init) {
    assemble(v);
    std::vector<double> b(static_cast<std::size_t>(n) + 1, 0.0);
    for (int j = 0; j < nsy; ++j)
      for (int i = 0; i < nsx; ++i) {
        const std::size_t k = idx(i, j);
        b[k] = rhs.at(i, j) - ws.weight[k] * m.det();
      }
    std::vector<double> x;
    bicgstab(apply, b, x, opts.linear_tol, opts.linear_max_iters, ws.diag);
    for (int j = 0; j < nsy; ++j)
      for (int i = 0; i < nsx; ++i) v.at(i, j) = x[idx(i, j)];
    detail::subtract_mean(v);
    if (detail::min_shifted_eigenvalue(v, m) < opts.positivity_floor) {
      // Linearized guess too aggressive; fall back to the zero start.
      v = GridFunction(s);
    }
  }

  GridFunction res = periodic_residual(v, m, rhs, weight);
  double res_sup = sup_norm(res);
  PeriodicResult result;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    if (res_sup <= opts.tol) {
      result.v = v;
      result.residual_sup = res_sup;
      result.newton_iters = iter;
      return result;
    }
    assemble(v);
    std::vector<double> b(static_cast<std::size_t>(n) + 1, 0.0);
    for (long k = 0; k < n; ++k) b[static_cast<std::size_t>(k)] = -res.values()[k];
    std::vector<double> delta;
    const KrylovResult kr = bicgstab(apply, b, delta, opts.linear_tol, opts.linear_max_iters, ws.diag);
    if (!kr.converged && kr.residual > 1e-6)
      throw no_convergence_error("solve_periodic_ma: linear solve stalled", res_sup, iter);

    double alpha = 1.0;
    bool accepted = false;
    for (int cut = 0; cut < 30; ++cut) {
      GridFunction trial = v;
      for (long k = 0; k < n; ++k)
        trial.values()[k] += alpha * delta[static_cast<std::size_t>(k)];
      detail::subtract_mean(trial);
      if (detail::min_shifted_eigenvalue(trial, m) >= opts.positivity_floor) {
        GridFunction trial_res = periodic_residual(trial, m, rhs, weight);
        const double trial_sup = sup_norm(trial_res);
        if (trial_sup <= res_sup * (1.0 - 1e-4 * alpha) || trial_sup <= opts.tol) {
          v = std::move(trial);
          res = std::move(trial_res);
          res_sup = trial_sup;
          accepted = true;
          break;
        }
      }
      alpha *= opts.damping;
    }
    if (!accepted)
      throw no_convergence_error("solve_periodic_ma: line search stalled", res_sup, iter);
  }
  if (res_sup <= opts.tol) {
    result.v = v;
    result.residual_sup = res_sup;
    result.newton_iters = opts.max_iters;
    return result;
  }
  throw no_convergence_error("solve_periodic_ma: out of Newton iterations", res_sup,
                             opts.max_iters);
}

}  // namespace ma
