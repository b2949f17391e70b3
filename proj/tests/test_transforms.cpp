#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <memory>

#include "leafray/transforms.hpp"

using namespace leafray;

namespace {

// scalar bump tensor source of the given degree with product-bump coefficients
SymmetricTensorSource bump_tensor(Rng& rng, int dim, int degree, int rank,
                                  double amp, double x1_half, double m_lo,
                                  double m_hi, int dm, double mr_lo = 0.28,
                                  double mr_hi = 0.38) {
  SymmetricTensorSource src;
  src.dim = dim;
  src.degree = degree;
  src.rank = rank;
  src.x1_lo = -x1_half;
  src.x1_hi = x1_half;
  int ncomp = int(sym::basis(dim, degree).indices.size());
  struct CompBump {
    Bump b1;  // x1 profile
    Bump b2;  // transversal profile (1D uses first coordinate only)
    Mat coef;
  };
  auto bumps = std::make_shared<std::vector<CompBump>>();
  for (int k = 0; k < ncomp; ++k) {
    CompBump cb;
    cb.b1 = Bump{rng.uniform(-0.3, 0.3) * x1_half, 0.0, x1_half * rng.uniform(0.55, 0.7),
                 1.0, 1.0};
    double mr = (m_hi - m_lo) * rng.uniform(mr_lo, mr_hi);
    double mc = rng.uniform(m_lo + mr, m_hi - mr);
    double mct = dm == 2 ? rng.uniform(m_lo + mr, m_hi - mr) : 0.0;
    cb.b2 = Bump{mc, mct, mr, mr, 1.0};
    cb.coef = Mat(rank, rank);
    for (int a = 0; a < rank; ++a)
      for (int b = 0; b < rank; ++b)
        cb.coef(a, b) = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1)) * amp;
    bumps->push_back(std::move(cb));
  }
  src.comp = [bumps, dm](int k, double x1, const Vec2& x) {
    const CompBump& cb = (*bumps)[size_t(k)];
    double v = cb.b1(x1, 0.0) * (dm == 2 ? cb.b2(x[0], x[1]) : cb.b2(x[0], 0.0));
    Mat out = cb.coef;
    out *= cplx(v, 0.0);
    return out;
  };
  return src;
}

CtaConnection bump_connection(Rng& rng, int rank, int dm, double amp, double x1_half,
                              double m_lo, double m_hi, bool unitary) {
  CtaConnection a;
  a.rank = rank;
  a.unitary = unitary;
  a.x1_lo = -x1_half;
  a.x1_hi = x1_half;
  auto mk = [&]() {
    auto bumps = std::make_shared<MatrixBumpField>();
    Rng sub = rng.fork();
    // reuse the 2D bump machinery over (x1, first transversal coordinate)
    *bumps = MatrixBumpField(sub, rank, 2, amp,
                             Box{-x1_half * 0.8, x1_half * 0.8, m_lo, m_hi}, unitary);
    return [bumps, dm](double x1, const Vec2& x) {
      Mat m = (*bumps)(x1, x[0]);
      if (dm == 2) {
        // taper in the second coordinate to stay compact inside the disk
        double u = x[1] / 0.75;
        double w = std::abs(u) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - u * u)) : 0.0;
        m *= cplx(w, 0.0);
      }
      return m;
    };
  };
  a.a1 = mk();
  a.am.resize(size_t(dm));
  for (int c = 0; c < dm; ++c) a.am[size_t(c)] = mk();
  return a;
}

}  // namespace

TEST_CASE("complex ray transform: zero source, linearity, dense cross-check") {
  SimpleSurface disk = SimpleSurface::disk(0.0);
  double T = 1.5, h = 1.0 / 48;
  Vec2 x{1.0, 0.0}, v{-1.0, 0.3};
  Rng rng(71);
  DbarOptions opts;
  opts.tol = 3e-5;

  SUBCASE("zero tensor gives zero trace and zero tail") {
    SymmetricTensorSource f;
    f.dim = 3;
    f.degree = 0;
    f.rank = 1;
    f.x1_lo = -1.0;
    f.x1_hi = 1.0;
    f.comp = [](int, double, const Vec2&) { return Mat(1, 1); };
    auto r = complex_ray_transform(disk, nullptr, f, x, v, T, h, opts);
    CHECK(r.trace.norm_sup() == 0.0);
    CHECK(r.trace.laurent_tail_norm() == 0.0);
  }
  SUBCASE("linearity in the source") {
    SymmetricTensorSource f1 = bump_tensor(rng, 3, 0, 2, 1.0, 1.0, -0.7, 0.7, 2);
    SymmetricTensorSource f2 = bump_tensor(rng, 3, 0, 2, 1.0, 1.0, -0.7, 0.7, 2);
    CtaConnection a = bump_connection(rng, 2, 2, 0.4, 1.2, -0.6, 0.6, false);
    cplx al(0.7, -0.3), be(-0.2, 0.5);
    SymmetricTensorSource fsum = f1;
    auto c1 = f1.comp, c2 = f2.comp;
    fsum.comp = [c1, c2, al, be](int k, double x1, const Vec2& xx) {
      Mat m = c1(k, x1, xx);
      m *= al;
      Mat m2 = c2(k, x1, xx);
      m2 *= be;
      m += m2;
      return m;
    };
    auto r1 = complex_ray_transform(disk, &a, f1, x, v, T, h, opts);
    auto r2 = complex_ray_transform(disk, &a, f2, x, v, T, h, opts);
    auto rs = complex_ray_transform(disk, &a, fsum, x, v, T, h, opts);
    double worst = 0.0;
    for (size_t k = 0; k < rs.trace.values.size(); ++k) {
      Mat expect = r1.trace.values[k];
      expect *= al;
      Mat t2 = r2.trace.values[k];
      t2 *= be;
      expect += t2;
      worst = std::max(worst, (rs.trace.values[k] - expect).norm_max());
    }
    CHECK(worst < 5e-4);  // three separate solves at the h=1/48 floor
  }
  SUBCASE("direct-summation cross-check of the solver representation") {
    SymmetricTensorSource f = bump_tensor(rng, 3, 0, 1, 1.0, 1.0, -0.7, 0.7, 2);
    auto r = complex_ray_transform(disk, nullptr, f, x, v, T, h, opts);
    // u = Pi(source_layer): direct summation at contour points must match
    std::vector<cplx> pts = {r.trace.contour.z[3], r.trace.contour.z[57]};
    std::vector<Mat> direct = cauchy_eval_points(r.solve.source_layer, pts);
    CHECK((direct[0] - r.trace.values[3]).norm_max() < 1e-10);
    CHECK((direct[1] - r.trace.values[57]).norm_max() < 1e-10);
  }
  SUBCASE("support outside the window is rejected") {
    SymmetricTensorSource f = bump_tensor(rng, 3, 0, 1, 1.0, 2.0, -0.7, 0.7, 2);
    CHECK_THROWS_AS(complex_ray_transform(disk, nullptr, f, x, v, T, h, opts), Error);
  }
}

TEST_CASE("kernel inclusion: symmetrised derivatives are annihilated") {
  SimpleSurface disk = SimpleSurface::disk(0.2);
  double T = 1.5, h = 1.0 / 48;
  Rng rng(73);
  DbarOptions opts;
  opts.tol = 5e-4;  // derivative sources are rough at h = 1/48
  for (int m : {0, 1}) {
    SymmetricTensorSource p = bump_tensor(rng, 3, m, 1, 1.0, 0.9, -0.55, 0.55, 2);
    SymmetricTensorSource dp = sym_derivative(p, disk);
    Vec2 x{0.98078528, 0.19509032};  // boundary point
    Vec2 v{-0.9, -0.05};
    auto r = complex_ray_transform(disk, nullptr, dp, x, v, T, h, opts);
    CAPTURE(m);
    CHECK(r.trace.norm_sup() < 1.5e-3);
    CHECK(r.trace.laurent_tail_norm() < 1.5e-3);
  }
}

TEST_CASE("exterior representation and the two-path consistency") {
  SimpleSurface disk = SimpleSurface::disk(0.0);
  double T = 1.2, h = 1.0 / 48;
  Rng rng(79);
  SymmetricTensorSource f = bump_tensor(rng, 3, 0, 1, 1.0, 0.8, -0.6, 0.6, 2);
  DbarOptions opts;
  opts.tol = 3e-5;
  auto r = complex_ray_transform(disk, nullptr, f, {1, 0}, {-1, 0.1}, T, h, opts);

  SUBCASE("zero trace maps to the zero function") {
    BoundaryTrace zero = r.trace;
    for (auto& m : zero.values) m = Mat(1, 1);
    for (auto& m : zero.laurent) m = Mat(1, 1);
    Mat v = exterior_representation(zero, 4.0, cplx(0.5, 0.2));
    CHECK(v.norm_max() == 0.0);
  }
  SUBCASE("laurent route equals the contour route") {
    double d = 2.5 * r.trace.contour.circumradius;
    double worst = 0.0;
    for (cplx w : {cplx(0.4, 0.2), cplx(-0.3, 0.5), cplx(0.15, -0.6)}) {
      cplx z = d / w + r.trace.laurent_center;
      Mat via_laurent = exterior_representation(r.trace, d, w);
      Mat via_contour = exterior_eval_via_contour(r.trace, z);
      worst = std::max(worst, (via_laurent - via_contour).norm_max());
    }
    CHECK(worst < 1e-8);
  }
  SUBCASE("d below the circumradius is rejected") {
    CHECK_THROWS_AS(exterior_representation(r.trace, 0.5, cplx(0.5, 0.0)), Error);
  }
}

TEST_CASE("global transport solution solves the sphere-bundle equation") {
  SimpleSurface disk = SimpleSurface::disk(0.0);
  double T = 1.2, h = 1.0 / 32;
  Rng rng(83);

  SUBCASE("manufactured solution for the untwisted equation") {
    // u := compact bump g; f := (d_{x1} + iX) g evaluated through the leaf
    // machinery means solving with source built from g's derivative.
    // Check instead: residual of the assembled field is small and the
    // m = 0 transport matches the leafwise values.
    SymmetricTensorSource f = bump_tensor(rng, 3, 0, 1, 1.0, 0.8, -0.6, 0.6, 2);
    DbarOptions opts;
    opts.tol = 4e-4;  // h = 1/32 floor
    std::vector<Vec2> pts = {{0.15, 0.1}, {-0.2, 0.25}};
    TransportField tf = global_transport_solution(disk, nullptr, f, pts, 16, T, h, opts);
    CHECK(tf.max_residual() <= 4e-4);
    CHECK(tf.u.size() == 2);
    CHECK(int(tf.u[0].size()) == 16);
  }
  SUBCASE("derivative sources have low fiber degree") {
    SymmetricTensorSource p =
        bump_tensor(rng, 3, 0, 1, 1.0, 0.8, -0.55, 0.55, 2, 0.36, 0.44);
    SymmetricTensorSource dp = sym_derivative(p, disk);
    DbarOptions opts;
    opts.tol = 3e-4;
    std::vector<Vec2> pts = {{0.1, -0.05}};
    TransportField tf =
        global_transport_solution(disk, nullptr, dp, pts, 32, T, 1.0 / 64, opts);
    std::vector<FourierDegree> deg = transport_fiber_degrees(tf, 1e-30);
    // for f = Dp with scalar p the transport solution is pi_0^* p: modes >= 1 tiny
    double total = 0.0, high = 0.0;
    for (size_t k = 0; k < deg[0].mode_norms.size(); ++k) {
      double e = deg[0].mode_norms[k] * deg[0].mode_norms[k];
      total += e;
      if (k >= 1) high += e;
    }
    CHECK(high / total < 1e-5);
  }
}

TEST_CASE("attenuated x-ray transform") {
  SimpleSurface disk = SimpleSurface::disk(0.0);
  Rng rng(89);

  SUBCASE("constant window times unit density integrates to length times L") {
    auto f = [](double x1, const Vec2&) -> cplx {
      return std::abs(x1) < 0.5 ? 1.0 : 0.0;
    };
    // hat f(0, x) = window length = 1.0
    cplx val = attenuated_xray(disk, f, -0.6, 0.6, 256, 0.0, {1, 0}, {-1, 0});
    CHECK(std::abs(val - cplx(2.0 * 1.0)) < 2e-2);  // quadrature of the sharp window
  }
  SUBCASE("derivative integrands vanish at xi1 = 0") {
    // hat f(0, gamma(t)) = d/dt g(gamma(t)) with g vanishing at the ends
    GeodesicPath path = geodesic_trace(disk, {1, 0}, {-1, 0.2});
    Bump g{0.5 * path.length, 0.0, 0.45 * path.length, 1.0, 1.0};
    int n = 256;
    double ht = path.length / n;
    cplx acc = 0.0;
    for (int k = 0; k <= n; ++k) {
      double t = k * ht;
      double w = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      acc += w / 3.0 * g.grad(t, 0.0).first;
    }
    acc *= ht;
    CHECK(std::abs(acc) < 1e-8);
  }
  SUBCASE("self-convergence under Simpson refinement") {
    Bump b1{0.0, 0.0, 0.5, 1.0, 1.0};
    Bump b2{0.1, -0.1, 0.5, 0.5, 1.0};
    auto f = [&](double x1, const Vec2& xx) -> cplx {
      return b1(x1, 0.0) * b2(xx[0], xx[1]);
    };
    double xi1 = 0.8;
    cplx c1 = attenuated_xray(disk, f, -0.7, 0.7, 200, xi1, {1, 0}, {-1, 0.15}, 512);
    cplx c2 = attenuated_xray(disk, f, -0.7, 0.7, 200, xi1, {1, 0}, {-1, 0.15}, 1024);
    CHECK(std::abs(c1 - c2) < 1e-8);
  }
  SUBCASE("trace route equals the quadrature route") {
    // the identity int e^{xi1 t} hat f dt = -i oint e^{-i xi1 z} u dz
    SymmetricTensorSource f = bump_tensor(rng, 3, 0, 1, 1.0, 0.7, -0.55, 0.55, 2);
    double T = 1.2, h = 1.0 / 48;
    DbarOptions opts;
    opts.tol = 3e-5;
    Vec2 x{1, 0}, v{-1, 0.12};
    auto r = complex_ray_transform(disk, nullptr, f, x, v, T, h, opts);
    auto scalar_f = [&](double x1, const Vec2& xx) -> cplx {
      return f.comp(0, x1, xx)(0, 0);
    };
    for (double xi1 : {0.0, 0.6, -1.1}) {
      cplx via_quad = attenuated_xray(disk, scalar_f, -0.75, 0.75, 400, xi1, x, v, 512);
      cplx via_trace = attenuated_xray_from_trace(r.trace, xi1);
      CAPTURE(xi1);
      CHECK(std::abs(via_quad - via_trace) < 5e-4);
    }
  }
}
