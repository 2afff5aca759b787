// Core grid calculus: Hessian stencils, determinant operators, oscillation,
// gradient-image volume and the diagnostic norms.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "ma/grid.hpp"
#include "ma/interp.hpp"
#include "ma/ma_operators.hpp"

using namespace ma;

namespace {

GridFunction random_quadratic(const GridSpec& spec, Rng& rng) {
  const double a = rng.uniform(0.2, 2.0);
  const double b = rng.uniform(0.2, 2.0);
  const double c = rng.uniform(-0.5, 0.5);
  const double dx = rng.uniform(-1, 1), dy = rng.uniform(-1, 1), e = rng.uniform(-1, 1);
  return GridFunction::sample(spec, [=](double x, double y) {
    return 0.5 * a * x * x + c * x * y + 0.5 * b * y * y + dx * x + dy * y + e;
  });
}

// Uniformly convex smooth field: dominating quadratic plus a mild Gaussian bump.
GridFunction random_convex(const GridSpec& spec, Rng& rng) {
  const double a = rng.uniform(1.0, 2.0);
  const double b = rng.uniform(1.0, 2.0);
  const double amp = rng.uniform(-0.05, 0.05);
  const double cx = rng.uniform(0.3, 0.7), cy = rng.uniform(0.3, 0.7);
  const double sigma = 0.3;
  return GridFunction::sample(spec, [=](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    return 0.5 * a * x * x + 0.5 * b * y * y +
           amp * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
  });
}

}  // namespace

TEST_CASE("grid spec invariants") {
  CHECK_THROWS_AS(GridSpec::box(3, 8), parameter_error);
  CHECK_THROWS_AS(GridSpec::box(8, 8, 1.0, 2.0), parameter_error);  // non-square cells
  const GridSpec s = GridSpec::box(8, 16, 1.0, 2.0);
  CHECK(s.spacing() == Catch::Approx(1.0 / 8));
  CHECK(s.nodes_x() == 9);
  CHECK(GridSpec::unit_torus(8).nodes_x() == 8);
}

TEST_CASE("hessian stencils are exact on quadratics") {
  const GridSpec spec = GridSpec::unit_box(16);
  const auto u = GridFunction::sample(spec, [](double x, double y) { return 0.5 * (x * x + y * y); });
  const auto H = hessian_central(u);
  for (int j = 1; j < spec.nodes_y() - 1; ++j)
    for (int i = 1; i < spec.nodes_x() - 1; ++i) {
      const Sym2 m = H.entry(i, j);
      CHECK(m.xx == Catch::Approx(1.0).margin(1e-12));
      CHECK(m.yy == Catch::Approx(1.0).margin(1e-12));
      CHECK(m.xy == Catch::Approx(0.0).margin(1e-12));
    }

  const auto v = GridFunction::sample(spec, [](double x, double y) { return x * y; });
  const auto Hv = hessian_central(v);
  for (int j = 1; j < spec.nodes_y() - 1; ++j)
    for (int i = 1; i < spec.nodes_x() - 1; ++i) {
      const Sym2 m = Hv.entry(i, j);
      CHECK(m.xy == Catch::Approx(1.0).margin(1e-12));
      CHECK(std::abs(m.xx) < 1e-12);
      CHECK(std::abs(m.yy) < 1e-12);
    }
}

TEST_CASE("hessian stencils reproduce random quadratics to machine precision") {
  Rng rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    const double a = rng.uniform(0.2, 2.0), b = rng.uniform(0.2, 2.0), c = rng.uniform(-0.5, 0.5);
    auto quad = [=](double x, double y) {
      return 0.5 * a * x * x + c * x * y + 0.5 * b * y * y + 0.3 * x - 0.1 * y;
    };
    // On the torus a quadratic is not periodic, but second differences only
    // see the local window, so exactness still holds away from the seam.
    const GridSpec spec =
        rep % 2 == 0 ? GridSpec::box(12, 12, 4.0, 4.0) : GridSpec::torus(12, 12, 4.0, 4.0);
    const auto H = hessian_central(GridFunction::sample(spec, quad));
    const Sym2 m = H.entry(5, 6);  // seam-free node
    CHECK(m.xx == Catch::Approx(a).margin(1e-12));
    CHECK(m.xy == Catch::Approx(c).margin(1e-12));
    CHECK(m.yy == Catch::Approx(b).margin(1e-12));
  }
}

TEST_CASE("hessian truncation error on the torus is second order") {
  const GridSpec spec = GridSpec::unit_torus(64);
  const double h = spec.spacing();
  const auto u = GridFunction::sample(
      spec, [](double x, double y) { return std::sin(2 * M_PI * x) * std::sin(2 * M_PI * y); });
  const auto H = hessian_central(u);
  double sup = 0.0;
  for (int j = 0; j < spec.nodes_y(); ++j)
    for (int i = 0; i < spec.nodes_x(); ++i) {
      const double exact =
          -4 * M_PI * M_PI * std::sin(2 * M_PI * spec.x(i)) * std::sin(2 * M_PI * spec.y(j));
      sup = std::max(sup, std::abs(H.entry(i, j).xx - exact));
    }
  CHECK(sup <= 4 * std::pow(M_PI, 4) * h * h * 1.1);
}

TEST_CASE("hessian eigenvalues multiply to the determinant") {
  Rng rng(21);
  const GridSpec spec = GridSpec::unit_box(16);
  GridFunction u(spec);
  for (double& v : u.values()) v = rng.uniform(-1, 1);
  const auto H = hessian_central(u);
  for (int j = 1; j < spec.nodes_y() - 1; ++j)
    for (int i = 1; i < spec.nodes_x() - 1; ++i) {
      const auto lam = H.eigenvalues(i, j);
      const double det = H.det(i, j);
      const double scale = std::max(1.0, std::abs(det));
      CHECK(std::abs(lam[0] * lam[1] - det) <= 1e-12 * scale);
      CHECK(lam[0] <= lam[1]);
    }
}

TEST_CASE("ma_det on closed forms") {
  const GridSpec spec = GridSpec::unit_box(32);
  SECTION("unit paraboloid") {
    const auto u =
        GridFunction::sample(spec, [](double x, double y) { return 0.5 * (x * x + y * y); });
    const auto d = ma_det(u);
    for (int j = 1; j < spec.nodes_y() - 1; ++j)
      for (int i = 1; i < spec.nodes_x() - 1; ++i)
        CHECK(d.at(i, j) == Catch::Approx(1.0).margin(1e-11));
  }
  SECTION("anisotropic quadratic") {
    const double a = 2.0, b = 0.25;
    const auto u = GridFunction::sample(
        spec, [=](double x, double y) { return 0.5 * (a * x * x + b * y * y); });
    const auto d = ma_det(u);
    CHECK(d.at(7, 19) == Catch::Approx(a * b).margin(1e-11));
  }
  SECTION("exponential field against the symbolic determinant") {
    // u = exp(r^2/2) has det D^2 u = (1 + x^2 + y^2) exp(x^2 + y^2).
    for (int n : {32, 64}) {
      const GridSpec fine = GridSpec::unit_box(n);
      const auto u = GridFunction::sample(
          fine, [](double x, double y) { return std::exp(0.5 * (x * x + y * y)); });
      const auto d = ma_det(u);
      double rel = 0.0;
      for (int j = 1; j < fine.nodes_y() - 1; ++j)
        for (int i = 1; i < fine.nodes_x() - 1; ++i) {
          const double x = fine.x(i), y = fine.y(j);
          const double exact = (1 + x * x + y * y) * std::exp(x * x + y * y);
          rel = std::max(rel, std::abs(d.at(i, j) - exact) / exact);
        }
      const double h = fine.spacing();
      CHECK(rel <= 10.0 * h * h);
    }
  }
}

TEST_CASE("split determinant telescopes exactly on the torus") {
  Rng rng(3);
  const GridSpec spec = GridSpec::unit_torus(24);
  SECTION("random fields") {
    for (int rep = 0; rep < 5; ++rep) {
      // Amplitude keeps the summands O(1); the identity itself is exact, the
      // budget below is pure rounding in the grid sum.
      GridFunction psi(spec);
      for (double& v : psi.values()) v = rng.uniform(-1e-3, 1e-3);
      const Sym2 eye{1.0, 0.0, 1.0};
      const auto det = ma_det_shifted_split(psi, eye);
      CHECK(std::abs(det.mean() - 1.0) <= 1e-12);
      const Sym2 m{2.0, 0.3, 0.7};
      const auto det2 = ma_det_shifted_split(psi, m);
      CHECK(std::abs(det2.mean() - m.det()) <= 1e-12);
    }
  }
  SECTION("large rough fields telescope to rounding accuracy") {
    GridFunction psi(spec);
    for (double& v : psi.values()) v = rng.uniform(-1.0, 1.0);
    const auto det = ma_det_shifted_split(psi, Sym2{1, 0, 1});
    double mean_abs = 0.0;
    for (double v : det.values()) mean_abs += std::abs(v);
    mean_abs /= det.size();
    CHECK(std::abs(det.mean() - 1.0) <= 1e-13 * mean_abs);
  }
  SECTION("split form matches the plain determinant to O(h^2)") {
    for (int n : {32, 64}) {
      const GridSpec s = GridSpec::unit_torus(n);
      const auto psi = GridFunction::sample(s, [](double x, double y) {
        return 0.01 * std::sin(2 * M_PI * x) * std::cos(2 * M_PI * y);
      });
      const auto split = ma_det_shifted_split(psi, Sym2{1, 0, 1});
      const auto H = hessian_central(psi);
      double gap = 0.0;
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const Sym2 m = H.entry(i, j);
          const double plain = (1 + m.xx) * (1 + m.yy) - m.xy * m.xy;
          gap = std::max(gap, std::abs(plain - split.at(i, j)));
        }
      CHECK(gap <= 5.0 * s.spacing() * s.spacing());
    }
  }
}

TEST_CASE("ma_monotone wide stencil") {
  const GridSpec spec = GridSpec::unit_box(32);
  const double d0 = kDegeneracyFloor;
  SECTION("isotropic paraboloid gives 1 for every width") {
    const auto u =
        GridFunction::sample(spec, [](double x, double y) { return 0.5 * (x * x + y * y); });
    for (int w : {1, 2, 3}) {
      const auto v = ma_monotone(u, w);
      CHECK(v.at(10, 10) == Catch::Approx(1.0).margin(10 * d0));
    }
  }
  SECTION("degenerate direction collapses on the aligned diagonal pair") {
    const auto u =
        GridFunction::sample(spec, [](double x, double y) { return 0.5 * (x + y) * (x + y); });
    const auto v = ma_monotone(u, 2);
    CHECK(v.at(16, 16) <= 2.0 * d0 * 1.5);
    CHECK(v.at(16, 16) >= 0.0);
    // Width 1 only sees the axis pair, which reads curvature 1 in each axis.
    const auto v1 = ma_monotone(u, 1);
    CHECK(v1.at(16, 16) == Catch::Approx(1.0).margin(1e-9));
  }
  SECTION("non-convex saddle clamps at the floor") {
    const auto u =
        GridFunction::sample(spec, [](double x, double y) { return 0.5 * (x * x - y * y); });
    const auto v2 = ma_monotone(u, 2);
    CHECK(v2.at(16, 16) >= 0.0);
    CHECK(v2.at(16, 16) <= d0 * d0 * 1.5);
    const auto v1 = ma_monotone(u, 1);
    CHECK(v1.at(16, 16) == Catch::Approx(d0).epsilon(0.5));
  }
  SECTION("invalid width") { CHECK_THROWS_AS(ma_monotone(GridFunction(spec), 4), parameter_error); }
}

TEST_CASE("ma_det and ma_monotone agree on stencil-aligned convex fields") {
  const GridSpec spec = GridSpec::unit_box(64);
  const double h = spec.spacing();
  // Axis-aligned, diagonal-aligned and isotropic samples.
  const auto cases = std::vector<GridFunction>{
      GridFunction::sample(spec, [](double x, double y) { return x * x + 0.25 * y * y; }),
      GridFunction::sample(spec,
                           [](double x, double y) { return 0.75 * (x + y) * (x + y) + 0.125 * (x - y) * (x - y); }),
      GridFunction::sample(spec,
                           [](double x, double y) { return std::exp(0.5 * (x * x + y * y)); }),
  };
  for (const auto& u : cases) {
    const auto det = ma_det(u);
    const auto mono = ma_monotone(u, 2);
    double gap = 0.0;
    for (int j = 2; j < spec.nodes_y() - 2; ++j)
      for (int i = 2; i < spec.nodes_x() - 2; ++i) {
        // The exponential field is isotropic only on the diagonal; compare
        // where an aligned pair exists (everywhere for the quadratics, the
        // diagonal line for the exponential).
        if (&u == &cases[2] && i != j) continue;
        gap = std::max(gap, std::abs(det.at(i, j) - mono.at(i, j)));
      }
    CHECK(gap <= 50.0 * (h * h + kDegeneracyFloor));
  }
}

TEST_CASE("oscillation") {
  const GridSpec spec = GridSpec::unit_box(16);
  const auto full = Region::full(spec);
  CHECK(oscillation(GridFunction(spec, 3.5), full) == 0.0);
  CHECK(oscillation(GridFunction::sample(spec, [](double x, double) { return x; }), full) ==
        Catch::Approx(1.0));
  CHECK(oscillation(GridFunction::sample(
                        spec, [](double x, double y) { return 0.5 * (x * x + y * y); }),
                    full) == Catch::Approx(1.0));
  CHECK_THROWS_AS(Region::interior(spec, 9), parameter_error);  // empty region never materializes
}

TEST_CASE("gradient image volume") {
  SECTION("unit paraboloid fills the unit square of gradients") {
    const GridSpec spec = GridSpec::unit_box(64);
    const auto u =
        GridFunction::sample(spec, [](double x, double y) { return 0.5 * (x * x + y * y); });
    const double vol = gradient_image_volume(u, Region::full(spec));
    CHECK(std::abs(vol - 1.0) <= 3 * spec.spacing());
  }
  SECTION("anisotropic quadratic doubles the image") {
    const GridSpec spec = GridSpec::unit_box(64);
    const auto u =
        GridFunction::sample(spec, [](double x, double y) { return x * x + 0.5 * y * y; });
    const double vol = gradient_image_volume(u, Region::full(spec));
    CHECK(std::abs(vol - 2.0) <= 3 * spec.spacing());
  }
  SECTION("divergence identity against the determinant integral") {
    Rng rng(11);
    const GridSpec spec = GridSpec::unit_box(64);
    for (int rep = 0; rep < 3; ++rep) {
      const auto u = random_convex(spec, rng);
      REQUIRE(discretely_convex(u));
      const Region r = Region::interior(spec, 2);
      const double vol = gradient_image_volume(u, r);
      const double integral = region_integral(ma_det(u), r);
      CHECK(std::abs(integral - vol) / vol <= 0.05);
    }
  }
  SECTION("measured convergence order of the identity gap is >= 1") {
    Rng rng(13);
    double gaps[2];
    int k = 0;
    for (int n : {32, 64}) {
      Rng local(17);
      const GridSpec spec = GridSpec::unit_box(n);
      const auto u = random_convex(spec, local);
      const Region r = Region::interior(spec, 2);
      gaps[k++] = std::abs(region_integral(ma_det(u), r) - gradient_image_volume(u, r));
    }
    CHECK(std::log2(gaps[0] / gaps[1]) >= 1.0);
  }
  SECTION("rejects non-convex input") {
    const GridSpec spec = GridSpec::unit_box(16);
    const auto u =
        GridFunction::sample(spec, [](double x, double y) { return 0.5 * (x * x - y * y); });
    CHECK_THROWS_AS(gradient_image_volume(u, Region::interior(spec, 1)), not_convex_error);
  }
}

TEST_CASE("energy inequality constant stays below the gradient-bound constant") {
  // For convex u, grad u on an interior region is bounded by osc/dist, so
  // int det <= pi (osc/dist)^2. Verified with the dimensional constant.
  Rng rng(29);
  const GridSpec spec = GridSpec::unit_box(48);
  const int margin = 8;
  const Region r = Region::interior(spec, margin);
  const double dist = margin * spec.spacing();
  double worst_ratio = 0.0;
  for (int rep = 0; rep < 8; ++rep) {
    const auto u = random_convex(spec, rng);
    const double osc = oscillation(u, Region::full(spec));
    const double lhs = region_integral(ma_det(u), r);
    worst_ratio = std::max(worst_ratio, lhs / (osc * osc));
  }
  const double bound = M_PI / (dist * dist);
  INFO("empirical constant " << worst_ratio << " vs bound " << bound);
  CHECK(worst_ratio <= 1.1 * bound);
}

TEST_CASE("hessian lp norm") {
  const GridSpec spec = GridSpec::unit_box(64);
  SECTION("identity hessian has Frobenius norm sqrt(2)") {
    const auto u =
        GridFunction::sample(spec, [](double x, double y) { return 0.5 * (x * x + y * y); });
    const double v = hessian_lp_norm(u, 2.0, Region::full(spec));
    CHECK(std::abs(v - std::sqrt(2.0)) <= 3 * spec.spacing());
  }
  SECTION("zero field") {
    CHECK(hessian_lp_norm(GridFunction(spec), 1.0, Region::full(spec)) == 0.0);
  }
  SECTION("p < 1 rejected") {
    CHECK_THROWS_AS(hessian_lp_norm(GridFunction(spec), 0.5, Region::full(spec)), parameter_error);
  }
  SECTION("L1 norm of the exponential field against fine quadrature") {
    // Analytic |D^2 u|_F for u = exp(r^2/2), integrated over [0,1/2]^2 on a
    // fine midpoint grid; the operator's node sum must land within 1%.
    auto frob = [](double x, double y) {
      const double e = std::exp(0.5 * (x * x + y * y));
      const double uxx = e * (1 + x * x), uyy = e * (1 + y * y), uxy = e * x * y;
      return std::sqrt(uxx * uxx + 2 * uxy * uxy + uyy * uyy);
    };
    const int fine = 2048;
    double integral = 0.0;
    const double fh = 0.5 / fine;
    for (int j = 0; j < fine; ++j)
      for (int i = 0; i < fine; ++i) integral += frob((i + 0.5) * fh, (j + 0.5) * fh) * fh * fh;

    const GridSpec big = GridSpec::unit_box(512);
    const auto u = GridFunction::sample(
        big, [](double x, double y) { return std::exp(0.5 * (x * x + y * y)); });
    const Region quarter = Region::where(
        big, [&](int i, int j) { return big.x(i) <= 0.5 + 1e-12 && big.y(j) <= 0.5 + 1e-12; });
    const double v = hessian_lp_norm(u, 1.0, quarter);
    CHECK(std::abs(v - integral) / integral <= 0.01);
  }
}

TEST_CASE("cubic sampler is fourth order and exact on cubics") {
  const GridSpec spec = GridSpec::unit_box(32);
  const auto cubic = GridFunction::sample(
      spec, [](double x, double y) { return x * x * x - 2 * x * y * y + 0.5 * y * y * y + x; });
  CubicSampler s(cubic);
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const double x = rng.uniform(0.0, 1.0), y = rng.uniform(0.0, 1.0);
    const double exact = x * x * x - 2 * x * y * y + 0.5 * y * y * y + x;
    CHECK(std::abs(s(x, y) - exact) <= 1e-12);
  }

  double err[2];
  int k = 0;
  for (int n : {32, 64}) {
    const GridSpec sp = GridSpec::unit_torus(n);
    const auto f = GridFunction::sample(
        sp, [](double x, double y) { return std::sin(2 * M_PI * x) * std::sin(2 * M_PI * y); });
    CubicSampler cs(f);
    Rng local(9);
    double sup = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
      const double x = local.uniform(), y = local.uniform();
      sup = std::max(sup,
                     std::abs(cs(x, y) - std::sin(2 * M_PI * x) * std::sin(2 * M_PI * y)));
    }
    err[k++] = sup;
  }
  CHECK(std::log2(err[0] / err[1]) >= 3.5);  // fourth order up to sampling noise
}
