#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ma/geometry.hpp"
#include "ma/grid.hpp"

namespace ma {

// Floor keeping the wide-stencil operator monotone at flat directions.
inline constexpr double kDegeneracyFloor = 1e-10;

// ---------------------------------------------------------------------------
// Determinant operators
// ---------------------------------------------------------------------------

// Pointwise det of the central-difference Hessian. Box grids report values at
// interior nodes (1-node margin); the rest stay zero.
inline GridFunction ma_det(const GridFunction& u) {
  const HessianField H = hessian_central(u);
  GridFunction out(u.spec());
  const int nsx = u.nodes_x(), nsy = u.nodes_y();
  for (int j = 0; j < nsy; ++j)
    for (int i = 0; i < nsx; ++i)
      if (H.valid(i, j)) out.at(i, j) = H.det(i, j);
  return out;
}

// Determinant split over the two grid diagonals:
//   det D^2 u  =  D_d1 u * D_d2 u - (uxx - uyy)^2 / 4,
// with D_d1, D_d2 the centered second differences along (1,1) and (1,-1).
// Still O(h^2) and exact on quadratics, but on a torus its grid sum vanishes
// identically (summation by parts holds exactly), which pins cell averages of
// det(M + D^2 u) to det M to machine precision. The periodic solvers build
// their residuals from this form.
struct SplitStencil {
  double dxx = 0, dyy = 0, dd1 = 0, dd2 = 0, dxy = 0;

  double split_det() const {
    const double diff = dxx - dyy;
    return dd1 * dd2 - 0.25 * diff * diff;
  }
  // det(M + D^2 u) expanded: det M + cof(M):D^2 u + split_det.
  double det_shifted(const Sym2& m) const {
    return m.det() + m.yy * dxx - 2.0 * m.xy * dxy + m.xx * dyy + split_det();
  }
};

inline SplitStencil split_stencil(const GridFunction& u, int i, int j) {
  SplitStencil s;
  s.dxx = second_difference(u, i, j, 1, 0);
  s.dyy = second_difference(u, i, j, 0, 1);
  s.dd1 = second_difference(u, i, j, 1, 1);
  s.dd2 = second_difference(u, i, j, 1, -1);
  const GridSpec& spec = u.spec();
  const double inv4h2 = 0.25 / (spec.spacing() * spec.spacing());
  if (spec.periodic()) {
    s.dxy = (u.wrap(i + 1, j + 1) - u.wrap(i + 1, j - 1) - u.wrap(i - 1, j + 1) +
             u.wrap(i - 1, j - 1)) *
            inv4h2;
  } else {
    s.dxy =
        (u.at(i + 1, j + 1) - u.at(i + 1, j - 1) - u.at(i - 1, j + 1) + u.at(i - 1, j - 1)) *
        inv4h2;
  }
  return s;
}

// det(M + D^2 u) in the split form, over the whole torus (or box interior).
inline GridFunction ma_det_shifted_split(const GridFunction& u, const Sym2& m) {
  GridFunction out(u.spec());
  const GridSpec& s = u.spec();
  const int nsx = s.nodes_x(), nsy = s.nodes_y();
  const int lo = s.periodic() ? 0 : 1;
  const int hix = s.periodic() ? nsx : nsx - 1;
  const int hiy = s.periodic() ? nsy : nsy - 1;
  parallel_for(static_cast<long>(hiy - lo), [&](long a, long b) {
    for (long jj = a; jj < b; ++jj) {
      const int j = static_cast<int>(jj) + lo;
      for (int i = lo; i < hix; ++i) out.at(i, j) = split_stencil(u, i, j).det_shifted(m);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Wide-stencil monotone operator
// ---------------------------------------------------------------------------

struct DirectionPair {
  int e1x, e1y, e2x, e2y;
};

inline std::vector<DirectionPair> monotone_pairs(int stencil_width) {
  if (stencil_width < 1 || stencil_width > 3)
    throw parameter_error("ma_monotone: stencil_width must be 1, 2 or 3");
  std::vector<DirectionPair> pairs{{1, 0, 0, 1}};
  if (stencil_width >= 2) pairs.push_back({1, 1, 1, -1});
  if (stencil_width >= 3) {
    pairs.push_back({2, 1, -1, 2});
    pairs.push_back({1, 2, -2, 1});
  }
  return pairs;
}

inline int monotone_margin(int stencil_width) { return stencil_width >= 3 ? 2 : 1; }

// At each node: min over orthogonal direction pairs of
//   prod_i max(Delta_{e_i} u, floor).
// Negative second differences are clamped at the floor, so the output never
// drops below floor^2 and the scheme keeps a comparison principle.
inline GridFunction ma_monotone(const GridFunction& u, int stencil_width,
                                double floor = kDegeneracyFloor) {
  const auto pairs = monotone_pairs(stencil_width);
  const int margin = monotone_margin(stencil_width);
  const GridSpec& s = u.spec();
  GridFunction out(s);
  const int nsx = s.nodes_x(), nsy = s.nodes_y();
  const int lo = s.periodic() ? 0 : margin;
  const int hix = s.periodic() ? nsx : nsx - margin;
  const int hiy = s.periodic() ? nsy : nsy - margin;
  for (int j = lo; j < hiy; ++j)
    for (int i = lo; i < hix; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : pairs) {
        const double d1 = std::max(second_difference(u, i, j, p.e1x, p.e1y), floor);
        const double d2 = std::max(second_difference(u, i, j, p.e2x, p.e2y), floor);
        best = std::min(best, d1 * d2);
      }
      out.at(i, j) = best;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient image volume
// ---------------------------------------------------------------------------

// Area of the convex hull of difference-quotient gradients over the region:
// central where both neighbors exist, second-order one-sided at a box edge.
// Node-centered samples are exact on quadratics, so for discretely convex u
// the hull approximates Vol(grad u (region)) to O(h).
inline double gradient_image_volume(const GridFunction& u, const Region& r) {
  if (!(u.spec() == r.spec())) throw spec_mismatch_error("gradient_image_volume: specs differ");
  if (!discretely_convex(u, r))
    throw not_convex_error("gradient_image_volume: field is not discretely convex on region");
  const GridSpec& s = u.spec();
  const double inv_h = 1.0 / s.spacing();
  const int nsx = s.nodes_x(), nsy = s.nodes_y();

  // 1D difference quotient along one axis; false if no stencil fits.
  auto axis_gradient = [&](int i, int j, int ex, int ey, double& out) {
    if (s.periodic()) {
      out = (u.wrap(i + ex, j + ey) - u.wrap(i - ex, j - ey)) * 0.5 * inv_h;
      return true;
    }
    const int n_along = ex != 0 ? nsx : nsy;
    const int pos = ex != 0 ? i : j;
    auto val = [&](int k) { return ex != 0 ? u.at(k, j) : u.at(i, k); };
    if (pos - 1 >= 0 && pos + 1 < n_along) {
      out = (val(pos + 1) - val(pos - 1)) * 0.5 * inv_h;
    } else if (pos + 2 < n_along) {
      out = (-3.0 * val(pos) + 4.0 * val(pos + 1) - val(pos + 2)) * 0.5 * inv_h;
    } else if (pos - 2 >= 0) {
      out = (3.0 * val(pos) - 4.0 * val(pos - 1) + val(pos - 2)) * 0.5 * inv_h;
    } else {
      return false;
    }
    return true;
  };

  std::vector<Vec2> grads;
  grads.reserve(r.count());
  r.for_each([&](int i, int j) {
    double gx, gy;
    if (axis_gradient(i, j, 1, 0, gx) && axis_gradient(i, j, 0, 1, gy))
      grads.push_back({gx, gy});
  });
  if (grads.size() < 3)
    throw parameter_error("gradient_image_volume: too few gradient samples");
  return polygon_area(convex_hull(std::move(grads)));
}

// Grid sum of a field over a region times the cell area (the discrete
// integral used against gradient_image_volume).
inline double region_integral(const GridFunction& f, const Region& r) {
  if (!(f.spec() == r.spec())) throw spec_mismatch_error("region_integral: specs differ");
  const double cell = f.spec().spacing() * f.spec().spacing();
  std::vector<double> terms;
  terms.reserve(r.count());
  r.for_each([&](int i, int j) { terms.push_back(f.at(i, j)); });
  return pairwise_sum(terms) * cell;
}

}  // namespace ma
