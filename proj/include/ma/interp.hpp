#pragma once

#include <array>
#include <cmath>

#include "ma/grid.hpp"

namespace ma {

namespace detail {

// Lagrange weights on the 4-node window {0,1,2,3} at parameter t.
inline std::array<double, 4> cubic_weights(double t) {
  const double t1 = t - 1.0, t2 = t - 2.0, t3 = t - 3.0;
  return {
      -t1 * t2 * t3 / 6.0,
      t * t2 * t3 / 2.0,
      -t * t1 * t3 / 2.0,
      t * t1 * t2 / 6.0,
  };
}

}  // namespace detail

// Bilinear sampler. O(h^2) in values; fine for maps and densities, not for
// anything that gets differenced twice afterwards.
class BilinearSampler {
 public:
  explicit BilinearSampler(const GridFunction& u) : u_(&u) {}

  bool contains(double x, double y) const {
    const GridSpec& s = u_->spec();
    if (s.periodic()) return true;
    return x >= 0.0 && y >= 0.0 && x <= s.lx && y <= s.ly;
  }

  double operator()(double x, double y) const {
    const GridSpec& s = u_->spec();
    const double h = s.spacing();
    if (s.periodic()) {
      x -= s.lx * std::floor(x / s.lx);
      y -= s.ly * std::floor(y / s.ly);
      const int i0 = std::min(static_cast<int>(x / h), s.nx - 1);
      const int j0 = std::min(static_cast<int>(y / h), s.ny - 1);
      const double tx = x / h - i0, ty = y / h - j0;
      return (1 - tx) * (1 - ty) * u_->wrap(i0, j0) + tx * (1 - ty) * u_->wrap(i0 + 1, j0) +
             (1 - tx) * ty * u_->wrap(i0, j0 + 1) + tx * ty * u_->wrap(i0 + 1, j0 + 1);
    }
    if (!contains(x, y)) throw parameter_error("BilinearSampler: point outside the grid");
    const int i0 = std::clamp(static_cast<int>(x / h), 0, s.nx - 1);
    const int j0 = std::clamp(static_cast<int>(y / h), 0, s.ny - 1);
    const double tx = x / h - i0, ty = y / h - j0;
    return (1 - tx) * (1 - ty) * u_->at(i0, j0) + tx * (1 - ty) * u_->at(i0 + 1, j0) +
           (1 - tx) * ty * u_->at(i0, j0 + 1) + tx * ty * u_->at(i0 + 1, j0 + 1);
  }

 private:
  const GridFunction* u_;
};

// Separable 4x4 Lagrange-cubic sampler, O(h^4) on smooth fields and exact on
// cubics. Near a box boundary the window shifts one-sided, keeping the order.
class CubicSampler {
 public:
  explicit CubicSampler(const GridFunction& u) : u_(&u) {}

  bool contains(double x, double y) const {
    const GridSpec& s = u_->spec();
    if (s.periodic()) return true;
    return x >= 0.0 && y >= 0.0 && x <= s.lx && y <= s.ly;
  }

  double operator()(double x, double y) const {
    const GridSpec& s = u_->spec();
    const double h = s.spacing();
    if (s.periodic()) {
      x -= s.lx * std::floor(x / s.lx);
      y -= s.ly * std::floor(y / s.ly);
      const int i0 = static_cast<int>(std::floor(x / h));
      const int j0 = static_cast<int>(std::floor(y / h));
      const auto wx = detail::cubic_weights(x / h - (i0 - 1));
      const auto wy = detail::cubic_weights(y / h - (j0 - 1));
      double acc = 0.0;
      for (int b = 0; b < 4; ++b)
        for (int a = 0; a < 4; ++a) acc += wx[a] * wy[b] * u_->wrap(i0 - 1 + a, j0 - 1 + b);
      return acc;
    }
    if (!contains(x, y)) throw parameter_error("CubicSampler: point outside the grid");
    const int nsx = s.nodes_x(), nsy = s.nodes_y();
    int is = std::clamp(static_cast<int>(std::floor(x / h)) - 1, 0, nsx - 4);
    int js = std::clamp(static_cast<int>(std::floor(y / h)) - 1, 0, nsy - 4);
    const auto wx = detail::cubic_weights(x / h - is);
    const auto wy = detail::cubic_weights(y / h - js);
    double acc = 0.0;
    for (int b = 0; b < 4; ++b)
      for (int a = 0; a < 4; ++a) acc += wx[a] * wy[b] * u_->at(is + a, js + b);
    return acc;
  }

 private:
  const GridFunction* u_;
};

}  // namespace ma
