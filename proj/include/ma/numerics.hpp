#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ma/errors.hpp"

namespace ma {

// ---------------------------------------------------------------------------
// Deterministic summation
// ---------------------------------------------------------------------------

// Fixed-order pairwise summation. The reduction tree depends only on the
// length, never on thread count, so results are reproducible bit for bit.
inline double pairwise_sum(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(std::span<const double>(v));
}

// ---------------------------------------------------------------------------
// Small symmetric 2x2 helpers
// ---------------------------------------------------------------------------

struct Sym2 {
  double xx = 0.0, xy = 0.0, yy = 0.0;

  double det() const { return xx * yy - xy * xy; }
  double trace() const { return xx + yy; }
  double frobenius() const { return std::sqrt(xx * xx + 2.0 * xy * xy + yy * yy); }

  // Eigenvalues sorted ascending.
  std::array<double, 2> eigenvalues() const {
    const double mean = 0.5 * (xx + yy);
    const double rad = std::hypot(0.5 * (xx - yy), xy);
    return {mean - rad, mean + rad};
  }

  double lambda_min() const { return eigenvalues()[0]; }

  // Rotation angle of the eigenvector belonging to the smaller eigenvalue.
  double eigen_angle() const {
    return 0.5 * std::atan2(2.0 * xy, xx - yy);
  }
};

// ---------------------------------------------------------------------------
// Dense linear algebra for tiny systems (normal equations, quadratic fits)
// ---------------------------------------------------------------------------

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// A is n*n row-major. Returns false if the pivot collapses.
inline bool solve_dense(std::vector<double>& a, std::vector<double>& b, int n) {
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    if (std::abs(a[pivot * n + col]) < 1e-300) return false;
    if (pivot != col) {
      for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      std::swap(b[col], b[pivot]);
    }
    const double inv = 1.0 / a[col * n + col];
    for (int r = col + 1; r < n; ++r) {
      const double factor = a[r * n + col] * inv;
      if (factor == 0.0) continue;
      for (int c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
      b[r] -= factor * b[col];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[r * n + c] * b[c];
    b[r] = s / a[r * n + r];
  }
  return true;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // rms of the fit residuals
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const int n = static_cast<int>(x.size());
  if (n < 2 || y.size() != x.size()) throw parameter_error("fit_line: need >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-300) throw parameter_error("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double rss = 0;
  for (int i = 0; i < n; ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    rss += r * r;
  }
  f.residual = std::sqrt(rss / n);
  return f;
}

// ---------------------------------------------------------------------------
// Matrix-free BiCGStab
// ---------------------------------------------------------------------------

struct KrylovResult {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;  // final |r|_2 / |b|_2
};

// Preconditioned BiCGStab for general (nonsymmetric) operators.
// apply(x, y) computes y = A x. diag, when nonempty, is used as a Jacobi
// preconditioner. Deterministic: fixed iteration order, no data races.
template <class Apply>
KrylovResult bicgstab(Apply&& apply, std::span<const double> b, std::vector<double>& x,
                       double rel_tol, int max_iters,
                       std::span<const double> diag = {}) {
  const std::size_t n = b.size();
  x.assign(n, 0.0);
  std::vector<double> r(b.begin(), b.end());
  std::vector<double> r0 = r;
  std::vector<double> p(n, 0.0), v(n, 0.0), s(n, 0.0), t(n, 0.0);
  std::vector<double> phat(n, 0.0), shat(n, 0.0);

  auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
    if (diag.empty()) {
      out = in;
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const double d = diag[i];
        out[i] = (std::abs(d) > 1e-300) ? in[i] / d : in[i];
      }
    }
  };
  auto norm2 = [&](const std::vector<double>& a) {
    double sum = 0.0;
    for (double z : a) sum += z * z;
    return std::sqrt(sum);
  };
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += a[i] * c[i];
    return sum;
  };

  const double bnorm = std::max(norm2(r), 1e-300);
  double rho_prev = 1.0, alpha = 1.0, omega = 1.0;
  KrylovResult res;
  res.residual = norm2(r) / bnorm;
  if (res.residual <= rel_tol) {
    res.converged = true;
    return res;
  }

  for (int it = 0; it < max_iters; ++it) {
    const double rho = dot(r0, r);
    if (std::abs(rho) < 1e-300) break;  // breakdown
    if (it == 0) {
      p = r;
    } else {
      const double beta = (rho / rho_prev) * (alpha / omega);
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    }
    precond(p, phat);
    apply(phat, v);
    const double r0v = dot(r0, v);
    if (std::abs(r0v) < 1e-300) break;
    alpha = rho / r0v;
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    if (norm2(s) / bnorm <= rel_tol) {
      for (std::size_t i = 0; i < n; ++i) x[i] += alpha * phat[i];
      res.converged = true;
      res.iterations = it + 1;
      res.residual = norm2(s) / bnorm;
      return res;
    }
    precond(s, shat);
    apply(shat, t);
    const double tt = dot(t, t);
    if (tt < 1e-300) break;
    omega = dot(t, s) / tt;
    for (std::size_t i = 0; i < n; ++i) x[i] += alpha * phat[i] + omega * shat[i];
    for (std::size_t i = 0; i < n; ++i) r[i] = s[i] - omega * t[i];
    res.iterations = it + 1;
    res.residual = norm2(r) / bnorm;
    if (res.residual <= rel_tol) {
      res.converged = true;
      return res;
    }
    if (std::abs(omega) < 1e-300) break;
    rho_prev = rho;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Deterministic RNG
// ---------------------------------------------------------------------------

// Thin wrapper around mt19937_64 producing doubles by bit manipulation, so
// streams do not depend on library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int uniform_int(int n) {  // in [0, n)
    return static_cast<int>(eng_() % static_cast<std::uint64_t>(n));
  }
  double gaussian() {
    // Box-Muller; consumes two uniforms per pair, caches the second.
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }
  std::uint64_t raw() { return eng_(); }

  // Independent substream for parallel or nested sampling.
  Rng split(std::uint64_t stream) const {
    std::mt19937_64 tmp(stream * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
    return Rng(tmp() ^ seed_tag_);
  }

 private:
  explicit Rng(std::uint64_t seed, int) : eng_(seed) {}
  std::mt19937_64 eng_;
  std::uint64_t seed_tag_ = 0x853c49e6748fea9bULL;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ma
