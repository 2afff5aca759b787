// Periodic corrector problem and the quadratic blow-down checks.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "ma/homogenization.hpp"

using namespace ma;

namespace {

GridFunction cosine_rhs(const GridSpec& spec, double delta, double det_m) {
  // Cell average is det_m exactly: the sine factors sum to zero on the lattice.
  return GridFunction::sample(spec, [=](double x, double y) {
    return det_m + delta * std::sin(2 * M_PI * x) * std::sin(2 * M_PI * y);
  });
}

}  // namespace

TEST_CASE("corrector of a flat right-hand side is zero") {
  const GridSpec spec = GridSpec::unit_torus(32);
  const QuadraticForm P(1.0, 0.0, 1.0);
  const CorrectorField w = solve_corrector(GridFunction(spec, 1.0), P);
  CHECK(w.residual_sup <= 1e-9);
  CHECK(w.w.max_abs() <= 1e-10);
  CHECK(w.newton_iters <= 1);
}

TEST_CASE("corrector matches the linearized Poisson prediction") {
  // det(I + D^2 w) = 1 + delta sin sin linearizes to Lap w = delta sin sin,
  // whose solution has sup |w| = delta / (8 pi^2).
  const GridSpec spec = GridSpec::unit_torus(64);
  const double delta = 0.1;
  const QuadraticForm P(1.0, 0.0, 1.0);
  PeriodicOptions opts;
  opts.tol = 1e-9;
  const CorrectorField w = solve_corrector(cosine_rhs(spec, delta, 1.0), P, opts);
  CHECK(w.residual_sup <= 1e-8);
  const double predicted = delta / (8 * M_PI * M_PI);
  CHECK(std::abs(w.w.max_abs() - predicted) <= 0.2 * predicted);
  CHECK(std::abs(w.w.mean()) <= 1e-12);
}

TEST_CASE("anisotropic quadratic part converges") {
  const GridSpec spec = GridSpec::unit_torus(64);
  const QuadraticForm P(2.0, 0.0, 0.5);  // det = 1
  PeriodicOptions opts;
  opts.tol = 1e-9;
  const CorrectorField w = solve_corrector(cosine_rhs(spec, 0.1, 1.0), P, opts);
  CHECK(w.residual_sup <= 1e-8);
  CHECK(std::abs(w.w.mean()) <= 1e-12);
}

TEST_CASE("corrector is unique under the mean-zero convention") {
  const GridSpec spec = GridSpec::unit_torus(48);
  const QuadraticForm P(1.0, 0.0, 1.0);
  const GridFunction f = cosine_rhs(spec, 0.1, 1.0);
  PeriodicOptions opts;
  opts.tol = 1e-10;
  const CorrectorField a = solve_corrector(f, P, opts);
  PeriodicOptions zero_start = opts;
  zero_start.poisson_init = false;
  const CorrectorField b = solve_corrector(f, P, zero_start);
  double gap = 0.0;
  for (long k = 0; k < a.w.size(); ++k)
    gap = std::max(gap, std::abs(a.w.values()[k] - b.w.values()[k]));
  CHECK(gap <= 1e-7);
}

TEST_CASE("corrector commutes with lattice shifts") {
  const GridSpec spec = GridSpec::unit_torus(48);
  const QuadraticForm P(1.0, 0.0, 1.0);
  const int shift = 7;
  const double s = shift * spec.spacing();
  PeriodicOptions opts;
  opts.tol = 1e-10;
  const CorrectorField w = solve_corrector(cosine_rhs(spec, 0.08, 1.0), P, opts);
  const GridFunction f_shifted = GridFunction::sample(spec, [&](double x, double y) {
    return 1.0 + 0.08 * std::sin(2 * M_PI * (x + s)) * std::sin(2 * M_PI * (y + s));
  });
  const CorrectorField ws = solve_corrector(f_shifted, P, opts);
  double gap = 0.0;
  for (int j = 0; j < spec.ny; ++j)
    for (int i = 0; i < spec.nx; ++i)
      gap = std::max(gap, std::abs(ws.w.at(i, j) - w.w.wrap(i + shift, j + shift)));
  CHECK(gap <= 1e-7);
}

TEST_CASE("average mismatch is rejected and stalls the core at a floor") {
  const GridSpec spec = GridSpec::unit_torus(32);
  const QuadraticForm P(1.0, 0.0, 1.0);
  const GridFunction bad = GridFunction::sample(spec, [](double x, double y) {
    return 1.05 * (1.0 + 0.05 * std::sin(2 * M_PI * x) * std::sin(2 * M_PI * y));
  });
  CHECK_THROWS_AS(solve_corrector(bad, P), compatibility_error);

  // Driving the shared core directly: the residual cannot drop below the
  // average mismatch, so the solve reports non-convergence at that floor.
  PeriodicOptions opts;
  opts.tol = 1e-9;
  opts.max_iters = 12;
  try {
    solve_periodic_ma(bad, Sym2{1, 0, 1}, UnitWeight{}, opts);
    FAIL("expected no_convergence_error");
  } catch (const no_convergence_error& e) {
    CHECK(e.residual >= 0.03);
    CHECK(e.residual <= 0.2);
  }
}

TEST_CASE("positivity is rejected for nonpositive data") {
  const GridSpec spec = GridSpec::unit_torus(32);
  const QuadraticForm P(1.0, 0.0, 1.0);
  const GridFunction f = GridFunction::sample(spec, [](double x, double) {
    return 0.2 + std::sin(2 * M_PI * x);  // dips negative
  });
  CHECK_THROWS_AS(solve_corrector(f, P), ellipticity_error);
}

TEST_CASE("quadratic blow-down") {
  const GridSpec cell = GridSpec::unit_torus(32);
  const QuadraticForm P(1.0, 0.2, 1.3);

  SECTION("pure quadratics are fixed points at every eps") {
    const GridFunction w0(cell);  // zero corrector
    for (int m : {1, 2, 4, 8}) {
      const GridFunction u = tile_with_quadratic(P, w0, m);
      const GridFunction ue = quadratic_blowdown(u, 1.0 / m);
      const GridSpec& s = ue.spec();
      double gap = 0.0;
      for (int j = 0; j <= s.ny; ++j)
        for (int i = 0; i <= s.nx; ++i)
          gap = std::max(gap, std::abs(ue.at(i, j) - P(s.x(i), s.y(j))));
      CHECK(gap <= 1e-13);
    }
  }

  SECTION("composite contracts to the quadratic at exactly eps^2") {
    PeriodicOptions opts;
    opts.tol = 1e-10;
    const QuadraticForm I2(1.0, 0.0, 1.0);
    const CorrectorField w = solve_corrector(cosine_rhs(cell, 0.1, 1.0), I2, opts);
    const double supw = w.w.max_abs();
    std::vector<double> sups;
    for (int m : {2, 4, 8}) {
      const GridFunction u = tile_with_quadratic(I2, w.w, m);
      const GridFunction ue = quadratic_blowdown(u, 1.0 / m);
      const GridSpec& s = ue.spec();
      double gap = 0.0;
      for (int j = 0; j <= s.ny; ++j)
        for (int i = 0; i <= s.nx; ++i)
          gap = std::max(gap, std::abs(ue.at(i, j) - I2(s.x(i), s.y(j))));
      CHECK(std::abs(gap - supw / (m * m)) <= 1e-12);
      sups.push_back(gap);
    }
    CHECK(sups[0] / sups[1] >= 3.5);
    CHECK(sups[0] / sups[1] <= 4.5);
    CHECK(sups[1] / sups[2] >= 3.5);
    CHECK(sups[1] / sups[2] <= 4.5);
  }

  SECTION("rejects non-integer 1/eps") {
    const GridFunction u = tile_with_quadratic(P, GridFunction(cell), 2);
    CHECK_THROWS_AS(quadratic_blowdown(u, 0.3), parameter_error);
  }
}

TEST_CASE("liouville recovery of the quadratic part") {
  const GridSpec cell = GridSpec::unit_torus(32);

  SECTION("zero corrector recovers M exactly") {
    const QuadraticForm P(1.4, -0.3, 0.9);
    const GridFunction u = tile_with_quadratic(P, GridFunction(cell), 8);
    const LiouvilleReport rep = liouville_check(u, {0.5, 0.25, 0.125});
    CHECK(std::abs(rep.recovered.xx - P.m.xx) <= 1e-10);
    CHECK(std::abs(rep.recovered.xy - P.m.xy) <= 1e-10);
    CHECK(std::abs(rep.recovered.yy - P.m.yy) <= 1e-10);
    for (const auto& e : rep.entries) CHECK(e.fit_sup_error <= 1e-10);
  }

  SECTION("corrector composite recovers M within 1e-3") {
    PeriodicOptions opts;
    opts.tol = 1e-10;
    for (const QuadraticForm& P : {QuadraticForm(1.0, 0.0, 1.0), QuadraticForm(2.0, 0.0, 0.5)}) {
      const CorrectorField w = solve_corrector(cosine_rhs(cell, 0.1, P.det()), P, opts);
      const GridFunction u = tile_with_quadratic(P, w.w, 8);
      const LiouvilleReport rep = liouville_check(u, {0.25, 0.125});
      CHECK(std::abs(rep.recovered.xx - P.m.xx) <= 1e-3);
      CHECK(std::abs(rep.recovered.xy - P.m.xy) <= 1e-3);
      CHECK(std::abs(rep.recovered.yy - P.m.yy) <= 1e-3);
      // Fit error bounded by the eps^2 contraction of the corrector plus grid error.
      const double h = 1.0 / cell.nx;
      const auto& last = rep.entries.back();
      CHECK(last.fit_sup_error <= 0.125 * 0.125 * w.w.max_abs() + h * h);
    }
  }
}
