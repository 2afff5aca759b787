#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "ma/errors.hpp"
#include "ma/numerics.hpp"

namespace ma {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

inline double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew monotone chain; returns the hull counterclockwise without the
// closing point. Collinear points are dropped.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  const int n = static_cast<int>(pts.size());
  if (n <= 2) return pts;
  std::vector<Vec2> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const int lower = k + 1;
  for (int i = n - 2; i >= 0; --i) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline double polygon_area(const std::vector<Vec2>& poly) {
  const int n = static_cast<int>(poly.size());
  if (n < 3) return 0.0;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * std::abs(s);
}

// Minimum enclosing (Loewner) ellipse {x : (x-c)^T E (x-c) <= 1}, computed by
// Khachiyan's barycentric ascent to relative gap eps.
struct Ellipse {
  Vec2 center;
  double exx = 1.0, exy = 0.0, eyy = 1.0;  // the quadratic form E

  double quad(const Vec2& p) const {
    const double dx = p.x - center.x, dy = p.y - center.y;
    return exx * dx * dx + 2.0 * exy * dx * dy + eyy * dy * dy;
  }
};

inline Ellipse min_enclosing_ellipse(const std::vector<Vec2>& pts, double eps = 1e-4,
                                     int max_iters = 100000) {
  const int m = static_cast<int>(pts.size());
  if (m < 3) throw parameter_error("min_enclosing_ellipse: need >= 3 points");
  constexpr int d = 2;
  std::vector<double> u(m, 1.0 / m);

  // 3x3 symmetric inverse, closed form.
  auto invert3 = [](const std::array<double, 9>& a) {
    std::array<double, 9> inv{};
    inv[0] = a[4] * a[8] - a[5] * a[7];
    inv[1] = a[2] * a[7] - a[1] * a[8];
    inv[2] = a[1] * a[5] - a[2] * a[4];
    inv[3] = a[5] * a[6] - a[3] * a[8];
    inv[4] = a[0] * a[8] - a[2] * a[6];
    inv[5] = a[2] * a[3] - a[0] * a[5];
    inv[6] = a[3] * a[7] - a[4] * a[6];
    inv[7] = a[1] * a[6] - a[0] * a[7];
    inv[8] = a[0] * a[4] - a[1] * a[3];
    const double det = a[0] * inv[0] + a[1] * inv[3] + a[2] * inv[6];
    if (std::abs(det) < 1e-300)
      throw parameter_error("min_enclosing_ellipse: degenerate point set");
    for (double& v : inv) v /= det;
    return inv;
  };

  for (int it = 0; it < max_iters; ++it) {
    std::array<double, 9> M{};
    for (int i = 0; i < m; ++i) {
      const double q[3] = {pts[i].x, pts[i].y, 1.0};
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) M[r * 3 + c] += u[i] * q[r] * q[c];
    }
    const auto Minv = invert3(M);
    double w_max = -1.0;
    int j_max = 0;
    for (int i = 0; i < m; ++i) {
      const double q[3] = {pts[i].x, pts[i].y, 1.0};
      double w = 0.0;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) w += q[r] * Minv[r * 3 + c] * q[c];
      if (w > w_max) {
        w_max = w;
        j_max = i;
      }
    }
    if (w_max <= (d + 1) * (1.0 + eps)) break;
    const double step = (w_max - d - 1.0) / ((d + 1.0) * (w_max - 1.0));
    for (double& ui : u) ui *= (1.0 - step);
    u[j_max] += step;
  }

  Ellipse e;
  double cx = 0.0, cy = 0.0;
  for (int i = 0; i < m; ++i) {
    cx += u[i] * pts[i].x;
    cy += u[i] * pts[i].y;
  }
  e.center = {cx, cy};
  // Covariance-like form: S = sum u_i p_i p_i^T - c c^T; E = S^{-1} / d.
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < m; ++i) {
    sxx += u[i] * pts[i].x * pts[i].x;
    sxy += u[i] * pts[i].x * pts[i].y;
    syy += u[i] * pts[i].y * pts[i].y;
  }
  sxx -= cx * cx;
  sxy -= cx * cy;
  syy -= cy * cy;
  const double det = sxx * syy - sxy * sxy;
  if (!(det > 1e-300)) throw parameter_error("min_enclosing_ellipse: degenerate point set");
  e.exx = syy / (det * d);
  e.exy = -sxy / (det * d);
  e.eyy = sxx / (det * d);
  // Guarantee containment: expand so every input point satisfies quad <= 1.
  double worst = 0.0;
  for (const Vec2& p : pts) worst = std::max(worst, e.quad(p));
  if (worst > 1.0) {
    e.exx /= worst;
    e.exy /= worst;
    e.eyy /= worst;
  }
  return e;
}

// Distance from a point to a segment.
inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const double abx = b.x - a.x, aby = b.y - a.y;
  const double len2 = abx * abx + aby * aby;
  double t = len2 > 0.0 ? ((p.x - a.x) * abx + (p.y - a.y) * aby) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * abx), dy = p.y - (a.y + t * aby);
  return std::hypot(dx, dy);
}

// Inradius of a convex polygon about an interior point.
inline double polygon_inradius(const std::vector<Vec2>& poly, const Vec2& about) {
  const int n = static_cast<int>(poly.size());
  if (n < 3) return 0.0;
  double r = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    r = std::min(r, point_segment_distance(about, poly[i], poly[(i + 1) % n]));
  return r;
}

}  // namespace ma
