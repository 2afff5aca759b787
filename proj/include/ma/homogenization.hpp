#pragma once

#include <cmath>
#include <vector>

#include "ma/periodic_newton.hpp"

namespace ma {

// P(x) = x^T M x / 2 with M symmetric positive definite.
struct QuadraticForm {
  Sym2 m;

  QuadraticForm(double m11, double m12, double m22) : m{m11, m12, m22} {
    if (m.lambda_min() <= 0.0) throw parameter_error("QuadraticForm: matrix must be SPD");
  }
  double operator()(double x, double y) const {
    return 0.5 * (m.xx * x * x + 2.0 * m.xy * x * y + m.yy * y * y);
  }
  double det() const { return m.det(); }
};

struct CorrectorField {
  GridFunction w;  // periodic, mean zero
  double residual_sup = 0.0;
  int newton_iters = 0;
};

// Periodic corrector: det(M + D^2 w) = f with cell-average(f) = det M.
// The mean-zero convention pins the additive constant.
inline CorrectorField solve_corrector(const GridFunction& f, const QuadraticForm& P,
                                      PeriodicOptions opts = {}) {
  if (!f.spec().periodic()) throw spec_mismatch_error("solve_corrector: f must live on a torus");
  if (f.min_value() <= 0.0) throw ellipticity_error("solve_corrector: f must be positive");
  const double avg = f.mean();
  if (std::abs(avg - P.det()) > 1e-10)
    throw compatibility_error("solve_corrector: cell average of f must equal det M");
  PeriodicResult r = solve_periodic_ma(f, P.m, UnitWeight{}, opts);
  return CorrectorField{std::move(r.v), r.residual_sup, r.newton_iters};
}

// P + w tiled over [0, periods]^2, exact periodic extension (no resampling).
inline GridFunction tile_with_quadratic(const QuadraticForm& P, const GridFunction& w,
                                        int periods) {
  if (periods < 1) throw parameter_error("tile_with_quadratic: periods must be >= 1");
  const GridSpec& ws = w.spec();
  if (!ws.periodic() || ws.lx != 1.0 || ws.ly != 1.0)
    throw spec_mismatch_error("tile_with_quadratic: w must live on the unit torus");
  const int n = ws.nx;
  const GridSpec global = GridSpec::box(n * periods, n * periods,
                                        static_cast<double>(periods),
                                        static_cast<double>(periods));
  GridFunction u(global);
  for (int j = 0; j <= n * periods; ++j)
    for (int i = 0; i <= n * periods; ++i)
      u.at(i, j) = P(global.x(i), global.y(j)) + w.at(i % n, j % n);
  return u;
}

// Prefix block over [0, periods]^2 of a box grid whose domain is a larger
// integer square; node positions carry over exactly.
inline GridFunction crop_to_periods(const GridFunction& u, int periods) {
  const GridSpec& s = u.spec();
  if (s.periodic()) throw spec_mismatch_error("crop_to_periods: box grids only");
  const int big = static_cast<int>(std::lround(s.lx));
  if (std::abs(s.lx - big) > 1e-12 || s.lx != s.ly || s.nx % big != 0)
    throw spec_mismatch_error("crop_to_periods: domain must be an integer square");
  if (periods < 1 || periods > big) throw parameter_error("crop_to_periods: bad period count");
  if (periods == big) return u;
  const int per_unit = s.nx / big;
  const int nc = per_unit * periods;
  const GridSpec sub = GridSpec::box(nc, nc, periods, periods);
  GridFunction out(sub);
  for (int j = 0; j <= nc; ++j)
    for (int i = 0; i <= nc; ++i) out.at(i, j) = u.at(i, j);
  return out;
}

// u_eps(x) = eps^2 u(x / eps) on the unit grid. The input covers [0, 1/eps]^2
// with 1/eps integer (exact tiling), so the rescaling is exact arithmetic:
// every unit-grid node maps onto an input node.
inline GridFunction quadratic_blowdown(const GridFunction& u, double eps) {
  const double m_real = 1.0 / eps;
  const int m = static_cast<int>(std::lround(m_real));
  if (!(eps > 0.0) || m < 1 || std::abs(m_real - m) > 1e-12)
    throw parameter_error("quadratic_blowdown: 1/eps must be a positive integer");
  const GridSpec& s = u.spec();
  if (std::abs(s.lx - m) > 1e-12 || std::abs(s.ly - m) > 1e-12)
    throw spec_mismatch_error("quadratic_blowdown: domain must be [0, 1/eps]^2");
  const GridSpec scaled = GridSpec{s.nx, s.ny, 1.0, 1.0, s.topology};
  scaled.validate();
  GridFunction out(scaled);
  const double e2 = eps * eps;
  for (long k = 0; k < u.size(); ++k) out.values()[k] = e2 * u.values()[k];
  return out;
}

struct QuadraticFit {
  Sym2 m;               // recovered Hessian
  double gx = 0.0, gy = 0.0, c = 0.0;
  double sup_error = 0.0;  // sup |u - fit|
};

// Least-squares quadratic through all nodes of a box grid.
inline QuadraticFit fit_quadratic(const GridFunction& u) {
  const GridSpec& s = u.spec();
  constexpr int k = 6;
  std::vector<double> ata(k * k, 0.0), atb(k, 0.0);
  auto basis = [](double x, double y, double* phi) {
    phi[0] = 1.0;
    phi[1] = x;
    phi[2] = y;
    phi[3] = 0.5 * x * x;
    phi[4] = x * y;
    phi[5] = 0.5 * y * y;
  };
  double phi[k];
  for (int j = 0; j < s.nodes_y(); ++j)
    for (int i = 0; i < s.nodes_x(); ++i) {
      basis(s.x(i), s.y(j), phi);
      const double val = u.at(i, j);
      for (int r = 0; r < k; ++r) {
        atb[r] += phi[r] * val;
        for (int c2 = 0; c2 < k; ++c2) ata[r * k + c2] += phi[r] * phi[c2];
      }
    }
  if (!solve_dense(ata, atb, k)) throw parameter_error("fit_quadratic: singular normal equations");
  QuadraticFit fit;
  fit.c = atb[0];
  fit.gx = atb[1];
  fit.gy = atb[2];
  fit.m = Sym2{atb[3], atb[4], atb[5]};
  for (int j = 0; j < s.nodes_y(); ++j)
    for (int i = 0; i < s.nodes_x(); ++i) {
      const double x = s.x(i), y = s.y(j);
      const double val = fit.c + fit.gx * x + fit.gy * y + 0.5 * fit.m.xx * x * x +
                         fit.m.xy * x * y + 0.5 * fit.m.yy * y * y;
      fit.sup_error = std::max(fit.sup_error, std::abs(u.at(i, j) - val));
    }
  return fit;
}

struct LiouvilleEntry {
  double eps = 0.0;
  Sym2 recovered;
  double fit_sup_error = 0.0;
};

struct LiouvilleReport {
  std::vector<LiouvilleEntry> entries;
  Sym2 recovered;  // from the smallest eps
};

// Blow the composite global solution down along eps_list and recover the
// quadratic part by least squares at each scale.
inline LiouvilleReport liouville_check(const GridFunction& u_global,
                                       const std::vector<double>& eps_list) {
  if (eps_list.empty()) throw parameter_error("liouville_check: empty eps list");
  LiouvilleReport report;
  double smallest = std::numeric_limits<double>::infinity();
  for (double eps : eps_list) {
    const int m = static_cast<int>(std::lround(1.0 / eps));
    const GridFunction u_eps = quadratic_blowdown(crop_to_periods(u_global, m), eps);
    const QuadraticFit fit = fit_quadratic(u_eps);
    report.entries.push_back({eps, fit.m, fit.sup_error});
    if (eps < smallest) {
      smallest = eps;
      report.recovered = fit.m;
    }
  }
  return report;
}

}  // namespace ma
