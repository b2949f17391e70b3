#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "leafray/dbar.hpp"
#include "leafray/random_fields.hpp"

using namespace leafray;

namespace {

GridWindow test_window(double S, double h) {
  return GridWindow::over(Box{-S, S, -S, S}, h);
}

LeafConnection connection_from_coef(const MatrixField& m, bool unitary = false) {
  MatrixField at(m.grid(), m.rank());
  MatrixField as = m;
  as *= cplx(2.0, 0.0);
  as.set_support(m.support());
  at.set_support(m.support());
  return LeafConnection{std::move(as), std::move(at), unitary};
}

// Tensor-product Gauss-Legendre quadrature of 1/(zeta - s) over one cell;
// the independent oracle for the exact cell kernel.
cplx cell_kernel_quadrature_panel(cplx zeta, cplx center, double a, double b);

cplx cell_kernel_quadrature(cplx zeta, double a, double b) {
  // 4x4 panel subdivision keeps the oracle accurate next to the cell
  cplx acc = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      cplx c(-a + (2 * i + 1) * a / 4.0, -b + (2 * j + 1) * b / 4.0);
      acc += cell_kernel_quadrature_panel(zeta, c, a / 4.0, b / 4.0);
    }
  return acc;
}

cplx cell_kernel_quadrature_panel(cplx zeta, cplx center, double a, double b) {
  static const double x12[6] = {0.1252334085114689, 0.3678314989981802,
                                0.5873179542866175, 0.7699026741943047,
                                0.9041172563704749, 0.9815606342467192};
  static const double w12[6] = {0.2491470458134028, 0.2334925365383548,
                                0.2031674267230659, 0.1600783285433462,
                                0.1069393259953184, 0.0471753363865118};
  cplx acc = 0.0;
  for (int i = 0; i < 12; ++i) {
    double xi = i < 6 ? -x12[i] : x12[i - 6];
    double wi = i < 6 ? w12[i] : w12[i - 6];
    for (int j = 0; j < 12; ++j) {
      double yj = j < 6 ? -x12[j] : x12[j - 6];
      double wj = j < 6 ? w12[j] : w12[j - 6];
      acc += wi * wj * a * b / (zeta - center - cplx(a * xi, b * yj));
    }
  }
  return acc;
}

MatrixField scalar_field(const GridWindow& g, const std::function<cplx(cplx)>& f) {
  MatrixField out(g, 1);
  for (int i = 0; i < g.ns; ++i)
    for (int j = 0; j < g.nt; ++j) out.at(i, j, 0, 0) = f(g.z(i, j));
  return out;
}

double residual_norm(const MatrixField& m, const MatrixField& f, const MatrixField& u) {
  MatrixField r = dbar_fd(u) + mul(m, u) - f;
  return norm_l2(r);
}

}  // namespace

TEST_CASE("cell kernel matches quadrature and far-field expansion") {
  double a = 0.5 / 64, b = 0.6 / 64;
  // includes axis-aligned offsets on all four sides and generic ones
  std::vector<cplx> offsets = {{2 * a, 0},  {-2 * a, 0},   {0, 2 * b},  {0, -2 * b},
                               {-6 * a, 0}, {0, -6 * b},   {5 * a, 4 * b},
                               {-3 * a, 7 * b}, {-9 * a, -2 * b}, {0.1, 0.07}};
  for (cplx z : offsets) {
    cplx exact = cauchy_cell_kernel(z, a, b);
    cplx quad = cell_kernel_quadrature(z, a, b);
    CAPTURE(z.real());
    CAPTURE(z.imag());
    CHECK(std::abs(exact - quad) < 1e-11 * (1.0 + std::abs(quad)));
  }
  CellMoments cm(a, b);
  for (cplx z : {cplx(0.3, 0.1), cplx(-0.25, 0.2), cplx(0.0, -0.4)}) {
    cplx inv = 1.0 / z, inv2 = inv * inv;
    cplx approx = cm.area * inv * (1.0 + inv2 * (cm.c3 + cm.c5 * inv2));
    CHECK(std::abs(approx - cauchy_cell_kernel(z, a, b)) < 1e-13);
  }
  CHECK(cauchy_cell_kernel(0.0, a, b) == cplx(0.0));
}

TEST_CASE("cauchy transform reproduces the radial closed form on the disk") {
  double h = 1.0 / 128;
  GridWindow g = test_window(2.0, h);
  // cell-averaged indicator of the unit disk
  MatrixField f(g, 1);
  for (int i = 0; i < g.ns; ++i)
    for (int j = 0; j < g.nt; ++j) {
      double r = std::abs(g.z(i, j));
      if (r < 1.0 - h) { f.at(i, j, 0, 0) = 1.0; continue; }
      if (r > 1.0 + h) continue;
      int in = 0;
      for (int p = 0; p < 16; ++p)
        for (int q = 0; q < 16; ++q) {
          cplx zz = g.z(i, j) + cplx((p + 0.5) / 16.0 - 0.5, (q + 0.5) / 16.0 - 0.5) * h;
          if (std::abs(zz) < 1.0) ++in;
        }
      f.at(i, j, 0, 0) = in / 256.0;
    }
  f.set_support(Box{-1.0 - 2 * h, 1.0 + 2 * h, -1.0 - 2 * h, 1.0 + 2 * h});
  MatrixField u = cauchy_transform(f);
  double worst = 0.0;
  for (int i = 0; i < g.ns; ++i)
    for (int j = 0; j < g.nt; ++j) {
      cplx z = g.z(i, j);
      double r = std::abs(z);
      if (std::abs(r - 1.0) < 0.1) continue;  // away from the circle
      cplx expect = r < 1.0 ? std::conj(z) : 1.0 / z;
      worst = std::max(worst, std::abs(u.at(i, j, 0, 0) - expect));
    }
  CHECK(worst < 1e-3);
  // smoothed radial source against the 1D quadrature oracle u = (2/z) int t f dt
  auto prof = [](double r) { return smooth_step_down((r - 0.6) / 0.3); };
  MatrixField fs = scalar_field(g, [&](cplx z) { return cplx(prof(std::abs(z)), 0.0); });
  fs.set_support(Box{-0.95, 0.95, -0.95, 0.95});
  MatrixField us = cauchy_transform(fs);
  auto oracle = [&](cplx z) {
    double r = std::abs(z);
    int n = 4000;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      double t = r * (k + 0.5) / n;
      acc += t * prof(t) * (r / n);
    }
    return 2.0 * acc / z;
  };
  for (cplx z : {cplx(0.31, 0.12), cplx(-0.5, 0.4), cplx(1.4, -0.3), cplx(0.05, -0.8)}) {
    int i = g.nearest_i(z.real()), j = g.nearest_j(z.imag());
    cplx zg = g.z(i, j);
    CHECK(std::abs(us.at(i, j, 0, 0) - oracle(zg)) < 2e-4);
  }
}

TEST_CASE("cauchy transform round trip and FFT/direct agreement") {
  double h = 1.0 / 64;
  GridWindow g = test_window(1.5, h);
  Rng rng(11);
  MatrixField gsm = random_matrix_field(rng, g, 1, 3, 1.0, Box{-0.7, 0.7, -0.7, 0.7});
  MatrixField f = dbar_fd(gsm);
  f.set_support(Box{-0.8, 0.8, -0.8, 0.8});
  MatrixField u = cauchy_transform(f);
  CHECK(dist_sup(u, gsm) < 2e-2);
  // corrected route tightens the round trip
  DbarWorkspace ws(g);
  DbarOptions opts;
  opts.tol = 3e-5;
  DbarResult res = ws.solve_source(nullptr, f, opts);
  CHECK(res.residual <= 3e-5);
  CHECK(dist_sup(res.u, gsm) < 2e-4);
  // off-grid direct evaluation agrees with the on-grid convolution
  std::vector<cplx> pts;
  std::vector<std::pair<int, int>> nodes = {{10, 20}, {40, 70}, {90, 33}};
  for (auto [i, j] : nodes) pts.push_back(g.z(i, j));
  std::vector<Mat> direct = cauchy_eval_points(f, pts);
  for (size_t k = 0; k < nodes.size(); ++k) {
    cplx diff = direct[k](0, 0) - u.at(nodes[k].first, nodes[k].second, 0, 0);
    CHECK(std::abs(diff) < 1e-11);
  }
}

TEST_CASE("cauchy transform: linearity and residual locality") {
  double h = 1.0 / 64;
  GridWindow g = test_window(1.5, h);
  Rng rng(57);
  Box sup{-0.6, 0.6, -0.6, 0.6};
  MatrixField f1 = random_matrix_field(rng, g, 2, 2, 1.0, sup);
  MatrixField f2 = random_matrix_field(rng, g, 2, 2, 1.0, sup);
  cplx al(0.3, -0.8), be(-1.1, 0.2);
  MatrixField fsum = f1;
  fsum *= al;
  MatrixField f2b = f2;
  f2b *= be;
  fsum += f2b;
  fsum.set_support(sup);
  MatrixField u1 = cauchy_transform(f1), u2 = cauchy_transform(f2);
  MatrixField us = cauchy_transform(fsum);
  MatrixField expect = u1;
  expect *= al;
  MatrixField u2b = u2;
  u2b *= be;
  expect += u2b;
  CHECK(dist_sup(us, expect) < 1e-12);
  // FD residual of the quadrature solution concentrates on the support
  MatrixField r = dbar_fd(us) - fsum;
  double inside = 0.0, outside = 0.0;
  for (int i = 2; i < g.ns - 2; ++i)
    for (int j = 2; j < g.nt - 2; ++j) {
      double v = 0.0;
      const cplx* p = r.raw().data() + g.idx(i, j) * r.fiber();
      for (size_t e = 0; e < r.fiber(); ++e) v = std::max(v, std::abs(p[e]));
      if (sup.scaled_about_center(1.2).contains(g.s(i), g.t(j))) inside = std::max(inside, v);
      else outside = std::max(outside, v);
    }
  CHECK(outside < 1e-6);
  CHECK(outside < 1e-3 * inside);
}

TEST_CASE("solve_dbar_source: trivial cases and scalar integrating factor") {
  double h = 1.0 / 64;
  GridWindow g = test_window(1.5, h);
  Rng rng(7);
  Box sup{-0.7, 0.7, -0.7, 0.7};
  MatrixField m = random_matrix_field(rng, g, 1, 2, 0.6, sup);
  LeafConnection conn = connection_from_coef(m);
  DbarOptions opts;
  opts.tol = 6e-6;  // grid floor at h = 1/64

  SUBCASE("zero source gives zero") {
    MatrixField f(g, 1);
    f.set_support(sup);
    DbarResult r = solve_dbar_source(conn, f, opts);
    CHECK(norm_sup(r.u) < 1e-12);
  }
  SUBCASE("zero connection reduces to the corrected Cauchy transform") {
    MatrixField f = random_matrix_field(rng, g, 1, 2, 1.0, sup);
    LeafConnection zero = LeafConnection::zero(g, 1);
    DbarResult r = solve_dbar_source(zero, f, opts);
    CHECK(residual_norm(MatrixField(g, 1), f, r.u) <= opts.tol * 1.01);
  }
  SUBCASE("scalar oracle, residual, and uniqueness surrogate") {
    MatrixField f = random_matrix_field(rng, g, 1, 2, 1.0, sup);
    DbarResult r = solve_dbar_source(conn, f, opts);
    CHECK(r.residual <= opts.tol);
    CHECK(residual_norm(m, f, r.u) <= opts.tol * 1.01);  // independent recomputation
    // integrating factor: u = e^{-Psi} Pi(e^{Psi} f), Psi = Pi(m)
    DbarWorkspace ws(g);
    DbarOptions tight;
    tight.tol = 6e-6;
    MatrixField psi = ws.solve_source(nullptr, m, tight).u;
    MatrixField ef(g, 1);
    for (int i = 0; i < g.ns; ++i)
      for (int j = 0; j < g.nt; ++j)
        ef.at(i, j, 0, 0) = std::exp(psi.at(i, j, 0, 0)) * f.at(i, j, 0, 0);
    ef.set_support(sup);
    MatrixField pef = ws.solve_source(nullptr, ef, tight).u;
    double worst = 0.0;
    for (int i = 0; i < g.ns; ++i)
      for (int j = 0; j < g.nt; ++j) {
        cplx oracle = std::exp(-psi.at(i, j, 0, 0)) * pef.at(i, j, 0, 0);
        worst = std::max(worst, std::abs(r.u.at(i, j, 0, 0) - oracle));
      }
    CHECK(worst < 5e-5);
    // different initial iterate reaches the same solution
    DbarOptions alt = opts;
    alt.start_from_zero = true;
    alt.anderson_depth = 0;
    DbarResult r2 = solve_dbar_source(conn, f, alt);
    CHECK(dist_sup(r.u, r2.u) < 10 * opts.tol);
  }
}

TEST_CASE("solve_dbar_invertible: identity, scalar exponential, block diagonal") {
  double h = 1.0 / 64;
  GridWindow g = test_window(1.5, h);
  DbarOptions opts;
  opts.tol = 6e-6;  // grid floor at h = 1/64

  SUBCASE("zero connection gives the identity") {
    auto r = solve_dbar_invertible(LeafConnection::zero(g, 2), opts);
    MatrixField id = MatrixField::identity(g, 2);
    CHECK(dist_sup(r.c, id) < 1e-12);
    CHECK(r.min_det == doctest::Approx(1.0));
  }
  SUBCASE("scalar solution is the exponential of the Cauchy transform") {
    Rng rng(3);
    Box sup{-0.7, 0.7, -0.7, 0.7};
    MatrixField m = random_matrix_field(rng, g, 1, 2, 0.7, sup);
    auto r = solve_dbar_invertible(connection_from_coef(m), opts);
    DbarWorkspace ws(g);
    DbarOptions tight;
    tight.tol = 6e-6;
    MatrixField psi = ws.solve_source(nullptr, m, tight).u;
    double worst = 0.0;
    for (int i = 0; i < g.ns; ++i)
      for (int j = 0; j < g.nt; ++j)
        worst = std::max(worst, std::abs(r.c.at(i, j, 0, 0) -
                                         std::exp(-psi.at(i, j, 0, 0))));
    CHECK(worst < 5e-5);
    CHECK(r.min_det > 0.1);
  }
  SUBCASE("block diagonal composes from scalars") {
    Rng rng(5);
    Box sup{-0.7, 0.7, -0.7, 0.7};
    MatrixField m1 = random_matrix_field(rng, g, 1, 2, 0.5, sup);
    MatrixField m2 = random_matrix_field(rng, g, 1, 2, 0.5, sup);
    MatrixField m(g, 2);
    for (int i = 0; i < g.ns; ++i)
      for (int j = 0; j < g.nt; ++j) {
        m.at(i, j, 0, 0) = m1.at(i, j, 0, 0);
        m.at(i, j, 1, 1) = m2.at(i, j, 0, 0);
      }
    m.set_support(sup);
    auto rb = solve_dbar_invertible(connection_from_coef(m), opts);
    auto r1 = solve_dbar_invertible(connection_from_coef(m1), opts);
    auto r2 = solve_dbar_invertible(connection_from_coef(m2), opts);
    double worst = 0.0;
    for (int i = 0; i < g.ns; ++i)
      for (int j = 0; j < g.nt; ++j) {
        worst = std::max(worst, std::abs(rb.c.at(i, j, 0, 0) - r1.c.at(i, j, 0, 0)));
        worst = std::max(worst, std::abs(rb.c.at(i, j, 1, 1) - r2.c.at(i, j, 0, 0)));
        worst = std::max(worst, std::abs(rb.c.at(i, j, 0, 1)));
        worst = std::max(worst, std::abs(rb.c.at(i, j, 1, 0)));
      }
    CHECK(worst < 5e-6);
  }
  SUBCASE("unitary scalar connection: modulus from the real part") {
    Rng rng(9);
    Box sup{-0.7, 0.7, -0.7, 0.7};
    // skew-Hermitian scalar bumps: purely imaginary components
    LeafConnection conn = random_leaf_connection(rng, g, 1, 2, 0.7, sup, true);
    auto r = solve_dbar_invertible(conn, opts);
    DbarWorkspace ws(g);
    DbarOptions tight;
    tight.tol = 6e-6;
    MatrixField psi = ws.solve_source(nullptr, dzbar_component(conn), tight).u;
    double worst = 0.0;
    for (int i = 0; i < g.ns; ++i)
      for (int j = 0; j < g.nt; ++j)
        worst = std::max(worst, std::abs(std::abs(r.c.at(i, j, 0, 0)) -
                                         std::exp(-psi.at(i, j, 0, 0).real())));
    CHECK(worst < 5e-5);
    CHECK(r.min_det > 0.0);
  }
}

TEST_CASE("dense fallback handles a strong connection on a small grid") {
  double h = 1.0 / 16;
  GridWindow g = test_window(1.0, h);
  Rng rng(21);
  Box sup{-0.5, 0.5, -0.5, 0.5};
  MatrixField m = random_matrix_field(rng, g, 1, 2, 2.0, sup);
  MatrixField f = random_matrix_field(rng, g, 1, 1, 1.0, sup);
  LeafConnection conn = connection_from_coef(m);
  DbarOptions opts;
  opts.tol = 5e-3;   // very coarse grid; the point is the dense path
  opts.max_iter = 1;  // exhaust the iteration so the dense system engages
  DbarResult r = solve_dbar_source(conn, f, opts);
  CHECK(r.used_dense);
  CHECK(r.residual <= opts.tol);
  CHECK(residual_norm(m, f, r.u) <= opts.tol * 1.01);
}

TEST_CASE("solve_dbar_commutator recovers a manufactured field") {
  double h = 1.0 / 48;
  GridWindow g = test_window(1.5, h);
  Rng rng(13);
  Box sup{-0.7, 0.7, -0.7, 0.7};
  DbarOptions opts;
  opts.tol = 1e-4;  // grid floor at h = 1/48

  SUBCASE("zero source gives zero") {
    LeafConnection conn = random_leaf_connection(rng, g, 2, 2, 0.4, sup, false);
    MatrixField q(g, 2);
    q.set_support(sup);
    auto r = solve_dbar_commutator(conn, q, opts);
    CHECK(norm_sup(r.f) < 1e-9);
  }
  SUBCASE("manufactured compact solution") {
    LeafConnection conn = random_leaf_connection(rng, g, 2, 2, 0.4, sup, false);
    MatrixField m = dzbar_component(conn);
    MatrixField f0 = random_matrix_field(rng, g, 2, 2, 1.0, Box{-0.6, 0.6, -0.6, 0.6});
    MatrixField q = dbar_fd(f0) + mul(m, f0) - mul(f0, m);
    q.set_support(tight_support(q, 1e-13));
    auto r = solve_dbar_commutator(conn, q, opts);
    CHECK(dist_sup(r.f, f0) < 5e-4);
    CHECK(r.residual < 1e-3);
  }
  SUBCASE("scalar zero-connection reduction") {
    LeafConnection zero = LeafConnection::zero(g, 1);
    MatrixField q = random_matrix_field(rng, g, 1, 2, 1.0, sup);
    auto r = solve_dbar_commutator(zero, q, opts);
    MatrixField resid = dbar_fd(r.f) - q;
    CHECK(norm_l2(resid) < 2e-4);
  }
}

TEST_CASE("plemelj extension: Cauchy formula cases and guards") {
  Contour circ = circle_contour(cplx(0, 0), 1.0, 256);
  auto values_of = [&](const std::function<cplx(cplx)>& f) {
    std::vector<Mat> v;
    for (cplx z : circ.z) {
      Mat m(1, 1);
      m(0, 0) = f(z);
      v.push_back(m);
    }
    return v;
  };
  SUBCASE("boundary values of z reproduce z") {
    PlemeljField pf(circ, values_of([](cplx z) { return z; }));
    for (cplx z : {cplx(0.2, 0.1), cplx(-0.4, 0.3), cplx(0.0, 0.0)})
      CHECK(std::abs(pf.eval(z)(0, 0) - z) < 1e-13);
  }
  SUBCASE("conjugate trace annihilates in the interior") {
    PlemeljField pf(circ, values_of([](cplx z) { return std::conj(z); }));
    for (cplx z : {cplx(0.3, -0.2), cplx(-0.1, 0.5)})
      CHECK(std::abs(pf.eval(z)(0, 0)) < 1e-13);
  }
  SUBCASE("constants extend to themselves") {
    PlemeljField pf(circ, values_of([](cplx) { return cplx(2.5, -1.0); }));
    CHECK(std::abs(pf.eval(cplx(0.4, 0.2))(0, 0) - cplx(2.5, -1.0)) < 1e-13);
  }
  SUBCASE("evaluation too close to the contour is rejected") {
    PlemeljField pf(circ, values_of([](cplx z) { return z; }));
    CHECK_THROWS_AS(pf.eval(cplx(0.999, 0.0)), Error);
  }
  SUBCASE("undersampled contours are rejected") {
    Contour tiny = circle_contour(cplx(0, 0), 1.0, 16);
    std::vector<Mat> v;
    for (cplx z : tiny.z) {
      Mat m(1, 1);
      m(0, 0) = std::pow(z, 7);  // fast variation across 16 samples
      v.push_back(m);
    }
    CHECK_THROWS_AS(PlemeljField(tiny, std::move(v)), Error);
  }
}

TEST_CASE("holomorphy test separates holomorphic from conjugate data") {
  double h = 1.0 / 128;
  GridWindow g = GridWindow::over(Box{-1, 1, -1, 1}, h);
  Box region{-0.9, 0.9, -0.9, 0.9};
  MatrixField z2 = scalar_field(g, [](cplx z) { return z * z; });
  CHECK(holomorphy_test(z2, region) < 1e-12);
  MatrixField zb = scalar_field(g, [](cplx z) { return std::conj(z); });
  double area = region.width() * region.height();
  CHECK(holomorphy_test(zb, region) == doctest::Approx(std::sqrt(area)).epsilon(0.01));
  MatrixField ez = scalar_field(g, [](cplx z) { return std::exp(z); });
  CHECK(holomorphy_test(ez, region) < 1e-8);
}

TEST_CASE("grid margins and support registration") {
  ComplexGrid grid(2.0, 1.0 / 32);
  grid.register_support(Box{-0.5, 0.5, -0.5, 0.5});
  CHECK_THROWS_AS(grid.register_support(Box{-1.5, 1.9, -0.5, 0.5}), Error);
  CHECK_THROWS_AS(ComplexGrid(2.0, 0.3), Error);  // S/h not integral
  // solver-level margin guard
  GridWindow g = test_window(1.0, 1.0 / 32);
  MatrixField f(g, 1);
  f.set_support(Box{-1.0, 1.0, -0.5, 0.5});
  DbarWorkspace ws(g);
  CHECK_THROWS_AS(ws.solve_source(nullptr, f, DbarOptions{}), Error);
}
