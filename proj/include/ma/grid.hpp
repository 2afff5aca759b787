#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ma/errors.hpp"
#include "ma/numerics.hpp"
#include "ma/parallel.hpp"

namespace ma {

enum class Topology { box, torus };

inline const char* to_string(Topology t) { return t == Topology::box ? "box" : "torus"; }

// Uniform 2D grid over [0,lx] x [0,ly]. nx, ny count cells; a box grid has
// nx+1 nodes per row (boundary included), a torus grid nx (periodic).
// Square cells are required: lx/nx == ly/ny.
struct GridSpec {
  int nx = 0;
  int ny = 0;
  double lx = 1.0;
  double ly = 1.0;
  Topology topology = Topology::box;

  static GridSpec box(int nx, int ny, double lx = 1.0, double ly = 1.0) {
    GridSpec s{nx, ny, lx, ly, Topology::box};
    s.validate();
    return s;
  }
  static GridSpec unit_box(int n) { return box(n, n); }
  static GridSpec torus(int nx, int ny, double lx = 1.0, double ly = 1.0) {
    GridSpec s{nx, ny, lx, ly, Topology::torus};
    s.validate();
    return s;
  }
  static GridSpec unit_torus(int n) { return torus(n, n); }

  void validate() const {
    if (nx < 4 || ny < 4) throw parameter_error("GridSpec: nx, ny must be >= 4");
    if (!(lx > 0.0) || !(ly > 0.0)) throw parameter_error("GridSpec: side lengths must be positive");
    const double hx = lx / nx, hy = ly / ny;
    if (std::abs(hx - hy) > 1e-12 * std::max(hx, hy))
      throw parameter_error("GridSpec: cells must be square (lx/nx == ly/ny)");
  }

  double spacing() const { return lx / nx; }
  bool periodic() const { return topology == Topology::torus; }
  int nodes_x() const { return periodic() ? nx : nx + 1; }
  int nodes_y() const { return periodic() ? ny : ny + 1; }
  long node_count() const { return static_cast<long>(nodes_x()) * nodes_y(); }
  double x(int i) const { return lx * i / nx; }
  double y(int j) const { return ly * j / ny; }

  bool operator==(const GridSpec& o) const {
    return nx == o.nx && ny == o.ny && lx == o.lx && ly == o.ly && topology == o.topology;
  }
};

inline int wrap_index(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

// Scalar field sampled at grid nodes, row-major (j outer, i inner).
class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(const GridSpec& spec, double init = 0.0)
      : spec_(spec), values_(spec.node_count(), init) {}

  template <class F>
  static GridFunction sample(const GridSpec& spec, F&& f) {
    GridFunction g(spec);
    const int nsx = spec.nodes_x(), nsy = spec.nodes_y();
    for (int j = 0; j < nsy; ++j)
      for (int i = 0; i < nsx; ++i) g.at(i, j) = f(spec.x(i), spec.y(j));
    return g;
  }

  const GridSpec& spec() const { return spec_; }
  int nodes_x() const { return spec_.nodes_x(); }
  int nodes_y() const { return spec_.nodes_y(); }
  long size() const { return static_cast<long>(values_.size()); }

  double& at(int i, int j) { return values_[static_cast<std::size_t>(j) * spec_.nodes_x() + i]; }
  double at(int i, int j) const { return values_[static_cast<std::size_t>(j) * spec_.nodes_x() + i]; }

  // Periodic access; only meaningful on torus grids.
  double wrap(int i, int j) const {
    return at(wrap_index(i, spec_.nodes_x()), wrap_index(j, spec_.nodes_y()));
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }
  double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
  double max_value() const { return *std::max_element(values_.begin(), values_.end()); }
  double mean() const { return pairwise_sum(values_) / static_cast<double>(values_.size()); }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void require_same_spec(const GridFunction& other, const char* what) const {
    if (!(spec_ == other.spec_)) throw spec_mismatch_error(std::string(what) + ": grid specs differ");
  }

 private:
  GridSpec spec_;
  std::vector<double> values_;
};

// Node mask over a grid. Nonempty by construction.
class Region {
 public:
  static Region full(const GridSpec& spec) {
    Region r(spec);
    std::fill(r.mask_.begin(), r.mask_.end(), std::uint8_t{1});
    r.count_ = spec.node_count();
    return r;
  }

  // Nodes at distance >= margin * h from the box boundary. On the torus there
  // is no boundary, so any margin yields the full grid.
  static Region interior(const GridSpec& spec, int margin) {
    if (margin < 0) throw parameter_error("Region::interior: margin must be >= 0");
    if (spec.periodic()) return full(spec);
    Region r(spec);
    const int nsx = spec.nodes_x(), nsy = spec.nodes_y();
    for (int j = margin; j < nsy - margin; ++j)
      for (int i = margin; i < nsx - margin; ++i) r.set(i, j);
    r.finish("Region::interior");
    return r;
  }

  static Region disc(const GridSpec& spec, double cx, double cy, double radius) {
    Region r(spec);
    const int nsx = spec.nodes_x(), nsy = spec.nodes_y();
    for (int j = 0; j < nsy; ++j)
      for (int i = 0; i < nsx; ++i) {
        const double dx = spec.x(i) - cx, dy = spec.y(j) - cy;
        if (dx * dx + dy * dy <= radius * radius) r.set(i, j);
      }
    r.finish("Region::disc");
    return r;
  }

  template <class Pred>
  static Region where(const GridSpec& spec, Pred&& pred) {
    Region r(spec);
    const int nsx = spec.nodes_x(), nsy = spec.nodes_y();
    for (int j = 0; j < nsy; ++j)
      for (int i = 0; i < nsx; ++i)
        if (pred(i, j)) r.set(i, j);
    r.finish("Region::where");
    return r;
  }

  const GridSpec& spec() const { return spec_; }
  bool contains(int i, int j) const {
    return mask_[static_cast<std::size_t>(j) * spec_.nodes_x() + i] != 0;
  }
  long count() const { return count_; }

  template <class F>
  void for_each(F&& f) const {
    const int nsx = spec_.nodes_x(), nsy = spec_.nodes_y();
    for (int j = 0; j < nsy; ++j)
      for (int i = 0; i < nsx; ++i)
        if (contains(i, j)) f(i, j);
  }

  // Margin to the nearest box-boundary node line, in cells (large on torus).
  int boundary_margin() const {
    if (spec_.periodic()) return std::numeric_limits<int>::max() / 2;
    int m = std::numeric_limits<int>::max() / 2;
    for_each([&](int i, int j) {
      m = std::min({m, i, j, spec_.nodes_x() - 1 - i, spec_.nodes_y() - 1 - j});
    });
    return m;
  }

 private:
  explicit Region(const GridSpec& spec) : spec_(spec), mask_(spec.node_count(), 0) {}
  void set(int i, int j) {
    auto& m = mask_[static_cast<std::size_t>(j) * spec_.nodes_x() + i];
    if (!m) {
      m = 1;
      ++count_;
    }
  }
  void finish(const char* what) {
    if (count_ == 0) throw parameter_error(std::string(what) + ": region is empty");
  }

  GridSpec spec_;
  std::vector<std::uint8_t> mask_;
  long count_ = 0;
};

// ---------------------------------------------------------------------------
// Second-order difference calculus
// ---------------------------------------------------------------------------

// Centered second difference along integer direction e, scaled by |e|^2 h^2.
// Wraps on the torus; the caller guarantees the stencil fits on a box.
inline double second_difference(const GridFunction& u, int i, int j, int ex, int ey) {
  const GridSpec& s = u.spec();
  const double h = s.spacing();
  const double scale = static_cast<double>(ex * ex + ey * ey) * h * h;
  double up, um;
  if (s.periodic()) {
    up = u.wrap(i + ex, j + ey);
    um = u.wrap(i - ex, j - ey);
  } else {
    up = u.at(i + ex, j + ey);
    um = u.at(i - ex, j - ey);
  }
  return (up - 2.0 * u.at(i, j) + um) / scale;
}

// Per-node symmetric Hessian with sorted eigenvalues. On a box grid values
// exist at nodes with a 1-node margin (valid(i,j)); on a torus everywhere.
class HessianField {
 public:
  HessianField(const GridSpec& spec, int margin)
      : spec_(spec),
        margin_(spec.periodic() ? 0 : margin),
        xx_(spec.node_count(), 0.0),
        xy_(spec.node_count(), 0.0),
        yy_(spec.node_count(), 0.0) {}

  const GridSpec& spec() const { return spec_; }
  int margin() const { return margin_; }

  bool valid(int i, int j) const {
    if (spec_.periodic()) return true;
    return i >= margin_ && j >= margin_ && i < spec_.nodes_x() - margin_ &&
           j < spec_.nodes_y() - margin_;
  }

  Sym2 entry(int i, int j) const {
    const std::size_t k = index(i, j);
    return Sym2{xx_[k], xy_[k], yy_[k]};
  }
  void set(int i, int j, const Sym2& m) {
    const std::size_t k = index(i, j);
    xx_[k] = m.xx;
    xy_[k] = m.xy;
    yy_[k] = m.yy;
  }

  std::array<double, 2> eigenvalues(int i, int j) const { return entry(i, j).eigenvalues(); }
  double det(int i, int j) const { return entry(i, j).det(); }

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * spec_.nodes_x() + i;
  }
  GridSpec spec_;
  int margin_;
  std::vector<double> xx_, xy_, yy_;
};

// Standard 3-point / 4-point central stencils, O(h^2) on smooth fields and
// exact on quadratics.
inline HessianField hessian_central(const GridFunction& u) {
  const GridSpec& s = u.spec();
  HessianField H(s, 1);
  const double h = s.spacing();
  const double inv_h2 = 1.0 / (h * h);
  const int nsx = s.nodes_x(), nsy = s.nodes_y();

  auto fill = [&](int i, int j, auto&& get) {
    const double c = get(i, j);
    Sym2 m;
    m.xx = (get(i + 1, j) - 2.0 * c + get(i - 1, j)) * inv_h2;
    m.yy = (get(i, j + 1) - 2.0 * c + get(i, j - 1)) * inv_h2;
    m.xy = (get(i + 1, j + 1) - get(i + 1, j - 1) - get(i - 1, j + 1) + get(i - 1, j - 1)) *
           (0.25 * inv_h2);
    H.set(i, j, m);
  };

  if (s.periodic()) {
    auto get = [&](int i, int j) { return u.wrap(i, j); };
    parallel_for(static_cast<long>(nsy), [&](long jlo, long jhi) {
      for (long j = jlo; j < jhi; ++j)
        for (int i = 0; i < nsx; ++i) fill(i, static_cast<int>(j), get);
    });
  } else {
    auto get = [&](int i, int j) { return u.at(i, j); };
    for (int j = 1; j < nsy - 1; ++j)
      for (int i = 1; i < nsx - 1; ++i) fill(i, j, get);
  }
  return H;
}

// max - min over a region.
inline double oscillation(const GridFunction& u, const Region& r) {
  if (!(u.spec() == r.spec())) throw spec_mismatch_error("oscillation: grid specs differ");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  r.for_each([&](int i, int j) {
    const double v = u.at(i, j);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  });
  return hi - lo;
}

// Discrete convexity: second differences along the 8 stencil directions
// (+-axis, +-diagonal) are >= -tol with tol = 1e-8 (1 + |u|_inf). Nodes whose
// stencil leaves a box grid are skipped.
inline double convexity_tolerance(const GridFunction& u) { return 1e-8 * (1.0 + u.max_abs()); }

inline bool discretely_convex(const GridFunction& u, const Region& r, double tol) {
  const GridSpec& s = u.spec();
  static constexpr int dirs[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
  const int nsx = s.nodes_x(), nsy = s.nodes_y();
  bool ok = true;
  r.for_each([&](int i, int j) {
    if (!ok) return;
    for (auto& d : dirs) {
      if (!s.periodic()) {
        if (i + std::abs(d[0]) >= nsx || i - std::abs(d[0]) < 0) continue;
        if (j + std::abs(d[1]) >= nsy || j - std::abs(d[1]) < 0) continue;
      }
      if (second_difference(u, i, j, d[0], d[1]) < -tol) {
        ok = false;
        return;
      }
    }
  });
  return ok;
}

inline bool discretely_convex(const GridFunction& u, const Region& r) {
  return discretely_convex(u, r, convexity_tolerance(u));
}

inline bool discretely_convex(const GridFunction& u) {
  return discretely_convex(u, Region::full(u.spec()));
}

// ( sum_r |D^2 u|_F^p h^2 )^(1/p). Diagnostic only; on a box grid the region
// is intersected with the nodes where the Hessian stencil exists.
inline double hessian_lp_norm(const GridFunction& u, double p, const Region& r) {
  if (p < 1.0) throw parameter_error("hessian_lp_norm: p must be >= 1");
  if (!(u.spec() == r.spec())) throw spec_mismatch_error("hessian_lp_norm: grid specs differ");
  const HessianField H = hessian_central(u);
  const double h = u.spec().spacing();
  std::vector<double> terms;
  terms.reserve(r.count());
  r.for_each([&](int i, int j) {
    if (!H.valid(i, j)) return;
    terms.push_back(std::pow(H.entry(i, j).frobenius(), p) * h * h);
  });
  if (terms.empty()) throw parameter_error("hessian_lp_norm: region misses the Hessian stencil");
  return std::pow(pairwise_sum(terms), 1.0 / p);
}

}  // namespace ma
