// leafray - complex parallel transport, gauge gluing, and their witnesses
//
// The complex parallel transport of a connection at (x, v) is the window
// contour trace of the invertible homogeneous dbar solution, normalized to
// the identity at infinity (the canonical coset representative modulo
// entire invertible factors). Equality of transports is decided by testing
// whether W = U_B^{-1} U_A continues from the exterior to an entire
// invertible function; the continuation is evaluated through the volume
// form of the Plemelj-Sokhotski integral (contour shifted to a far circle),
// which stays accurate up to the window edge.
#ifndef LEAFRAY_HOLONOMY_HPP
#define LEAFRAY_HOLONOMY_HPP

#include "leafray/transforms.hpp"

namespace leafray {

// ---- leaf with exterior collar ------------------------------------------------

// CTA leaf whose grid extends past the data window [-T,T] x [0,L] by a
// collar of exterior nodes; ambient pullbacks vanish there. The window box
// stays lattice-aligned.
struct CollaredLeaf {
  CtaLeaf leaf;      // grid = extended window
  Box data_window;   // [-T, T] x [0, L]
  int pad_s = 0, pad_t = 0;

  int wi0() const { return pad_s; }
  int wi1() const { return leaf.grid.ns - 1 - pad_s; }
  int wj0() const { return pad_t; }
  int wj1() const { return leaf.grid.nt - 1 - pad_t; }
  bool in_window(int i, int j) const {
    return i >= wi0() && i <= wi1() && j >= wj0() && j <= wj1();
  }
};

inline CollaredLeaf build_collared_leaf(const SimpleSurface& surf, const Vec2& x,
                                        const Vec2& v, double T, double h,
                                        double collar_s = 0.5, double collar_t = 0.5) {
  CollaredLeaf out;
  GeodesicPath path = geodesic_trace(surf, x, v);
  double L = path.length;
  out.data_window = Box{-T, T, 0.0, L};
  int ns_half = std::max(2, int(std::lround(T / h)));
  int nt_iv = std::max(2, 2 * int(std::lround(L / (2.0 * h))));
  double ht = L / nt_iv;
  out.pad_s = collar_s <= 0.0 ? 0 : std::max(2, int(std::lround(collar_s / h)));
  out.pad_t = collar_t <= 0.0 ? 0 : std::max(2, int(std::lround(collar_t / ht)));
  GridWindow g;
  g.hs = T / ns_half;
  g.ht = ht;
  g.ns = 2 * (ns_half + out.pad_s) + 1;
  g.nt = nt_iv + 2 * out.pad_t + 1;
  g.s0 = -T - out.pad_s * g.hs;
  g.t0 = -out.pad_t * g.ht;
  out.leaf.surface = surf;
  out.leaf.base_x = x;
  out.leaf.base_v = v;
  out.leaf.path = path;
  out.leaf.T = T;
  out.leaf.window = out.data_window;
  out.leaf.grid = g;
  return out;
}

// Pullback that zero-fills the collar (data is compactly supported inside
// the data window, and the geodesic chart is only used inside it).
inline LeafConnection collared_pullback(const CollaredLeaf& cl, const CtaConnection& a) {
  const GridWindow& g = cl.leaf.grid;
  const int r = a.rank;
  MatrixField as(g, r), at(g, r);
  for (int j = cl.wj0(); j <= cl.wj1(); ++j) {
    double t = std::min(std::max(g.t(j), 0.0), cl.leaf.path.length);
    GeodesicSample gs = cl.leaf.path.at(t);
    for (int i = cl.wi0(); i <= cl.wi1(); ++i) {
      if (a.a1) as.set_value(i, j, a.a1(g.s(i), gs.x));
      Mat acc(r, r);
      for (size_t c = 0; c < a.am.size(); ++c) {
        if (!a.am[c]) continue;
        Mat mc = a.am[c](g.s(i), gs.x);
        mc *= cplx(gs.v[c], 0.0);
        acc += mc;
      }
      at.set_value(i, j, acc);
    }
  }
  as.set_support(tight_support(as, 1e-14 * (norm_sup(as) + 1e-300)));
  at.set_support(tight_support(at, 1e-14 * (norm_sup(at) + 1e-300)));
  return LeafConnection{std::move(as), std::move(at), a.unitary};
}

// ---- complex parallel transport -------------------------------------------------

struct TransportCertificate {
  BoundaryTrace trace;           // normalized representative on the window contour
  double exterior_identity_gap = 0.0;  // sup |U - id| on the far circle
  double min_det = 0.0;
  double solver_residual = 0.0;
};

struct TransportComputation {
  TransportCertificate cert;
  CollaredLeaf leaf;
  MatrixField u;             // full-grid solution C
  MatrixField source_layer;  // C = id + Pi(layer)
};

inline TransportComputation complex_parallel_transport(const SimpleSurface& surf,
                                                       const CtaConnection& a,
                                                       const Vec2& x, const Vec2& v,
                                                       double T, double h,
                                                       const DbarOptions& opts = {}) {
  TransportComputation out;
  out.leaf = build_collared_leaf(surf, x, v, T, h);
  LeafConnection la = collared_pullback(out.leaf, a);
  DbarWorkspace ws(out.leaf.leaf.grid);
  auto inv = ws.solve_invertible(dzbar_component(la), opts);
  out.u = inv.c;
  out.source_layer = inv.source_layer;
  TransportCertificate& c = out.cert;
  c.solver_residual = inv.residual;
  c.min_det = inv.min_det;
  // trace on the data-window contour
  Contour ct;
  {
    Box b = out.leaf.data_window;
    GridWindow wg;  // window sub-grid view for the contour
    wg.s0 = b.s0;
    wg.t0 = b.t0;
    wg.hs = out.leaf.leaf.grid.hs;
    wg.ht = out.leaf.leaf.grid.ht;
    wg.ns = out.leaf.wi1() - out.leaf.wi0() + 1;
    wg.nt = out.leaf.wj1() - out.leaf.wj0() + 1;
    ct = grid_contour(wg);
  }
  c.trace.contour = ct;
  const GridWindow& g = out.leaf.leaf.grid;
  auto read = [&](int i, int j) { return out.u.value(i, j); };
  for (int i = out.leaf.wi0(); i <= out.leaf.wi1(); ++i)
    c.trace.values.push_back(read(i, out.leaf.wj0()));
  for (int j = out.leaf.wj0(); j <= out.leaf.wj1(); ++j)
    c.trace.values.push_back(read(out.leaf.wi1(), j));
  for (int i = out.leaf.wi1(); i >= out.leaf.wi0(); --i)
    c.trace.values.push_back(read(i, out.leaf.wj1()));
  for (int j = out.leaf.wj1(); j >= out.leaf.wj0(); --j)
    c.trace.values.push_back(read(out.leaf.wi0(), j));
  c.trace.laurent_center = cplx(out.leaf.data_window.cs(), out.leaf.data_window.ct());
  c.trace.laurent = laurent_moments(out.source_layer, c.trace.laurent_center, kLaurentModes);
  c.trace.T = T;
  c.trace.base_x = x;
  c.trace.base_v = v;
  c.trace.solver_residual = inv.residual;
  // exterior identity gap on the shifted circle
  double rad = 2.0 * c.trace.contour.circumradius;
  Contour circ = circle_contour(c.trace.contour.center, rad, 256);
  std::vector<Mat> uc = cauchy_eval_points(out.source_layer, circ.z);
  for (size_t k = 0; k < uc.size(); ++k) {
    Mat d = uc[k];  // U - id = Pi(layer)
    c.exterior_identity_gap = std::max(c.exterior_identity_gap, d.norm_max());
  }
  (void)g;
  return out;
}

// ---- equality decision procedure ---------------------------------------------

struct EqualTransportDiagnostics {
  double exterior_holomorphy = 0.0;   // FD dbar of W over the collar
  double plemelj_mismatch = 0.0;      // circle continuation vs W on the window contour
  double min_det_h = 0.0;
  double g_residual = 0.0;            // FD residual of the gauge equation
  double exterior_identity_gap = 0.0;  // sup |G - id| on the collar
  bool pass = false;
};

struct EqualTransportResult {
  std::optional<GaugeTransform> gauge;
  EqualTransportDiagnostics diag;
  MatrixField g_field;  // defined on the collared grid
};

// Decides whether A and B have equal complex parallel transport at (x, v).
// A negative outcome is a diagnostics-bearing result, not an error.
inline EqualTransportResult equal_transport_check(const SimpleSurface& surf,
                                                  const CtaConnection& a,
                                                  const CtaConnection& b,
                                                  const Vec2& x, const Vec2& v,
                                                  double T, double h, double tol,
                                                  const DbarOptions& opts = {},
                                                  double collar_s = 0.5,
                                                  double collar_t = 0.5) {
  CollaredLeaf cl = build_collared_leaf(surf, x, v, T, h, collar_s, collar_t);
  const GridWindow& g = cl.leaf.grid;
  LeafConnection la = collared_pullback(cl, a);
  LeafConnection lb = collared_pullback(cl, b);
  MatrixField ma = dzbar_component(la), mb = dzbar_component(lb);
  DbarWorkspace ws(g);
  auto ua = ws.solve_invertible(ma, opts);
  auto ub = ws.solve_invertible(mb, opts);
  MatrixField ub_inv = pointwise_inverse(ub.c);
  MatrixField w = mul(ub_inv, ua.c);

  EqualTransportResult out;
  EqualTransportDiagnostics& d = out.diag;

  // (i) W is holomorphic outside the data window (structural; collar check)
  {
    MatrixField dw = dbar_fd(w);
    double s = 0.0;
    for (int i = 0; i < g.ns; ++i)
      for (int j = 0; j < g.nt; ++j) {
        if (cl.in_window(i, j)) continue;
        const cplx* p = dw.raw().data() + g.idx(i, j) * dw.fiber();
        for (size_t e = 0; e < dw.fiber(); ++e) s += std::norm(p[e]);
      }
    d.exterior_holomorphy = std::sqrt(s * g.cell_area());
  }

  // entire continuation H of W: volume form of the Plemelj integral
  // (dbar W = U_B^{-1} (B - A)(dbar) U_A is algebraic and compact)
  MatrixField dbar_w = mul(ub_inv, mul(mb - ma, ua.c));
  dbar_w.set_support(tight_support(dbar_w, 1e-13 * (norm_sup(dbar_w) + 1e-300)));
  DbarResult uq = ws.solve_source(nullptr, dbar_w, opts);
  MatrixField hfield = w - uq.u;

  // (ii) independent route: circle-contour Plemelj continuation vs W on the
  // window contour
  {
    double rad = 2.0 * std::hypot(0.5 * cl.data_window.width(), 0.5 * cl.data_window.height());
    cplx ctr(cl.data_window.cs(), cl.data_window.ct());
    Contour circ = circle_contour(ctr, rad, 512);
    std::vector<Mat> ua_c = cauchy_eval_points(ua.source_layer, circ.z);
    std::vector<Mat> ub_c = cauchy_eval_points(ub.source_layer, circ.z);
    std::vector<Mat> wc(circ.z.size());
    for (size_t k = 0; k < circ.z.size(); ++k) {
      Mat uav = Mat::identity(ua.c.rank()) + ua_c[k];
      Mat ubv = Mat::identity(ua.c.rank()) + ub_c[k];
      wc[k] = inverse(ubv) * uav;
    }
    PlemeljField pf(circ, std::move(wc));
    for (int i = cl.wi0(); i <= cl.wi1(); ++i)
      for (int j : {cl.wj0(), cl.wj1()}) {
        Mat gap = pf.eval_unchecked(g.z(i, j)) - w.value(i, j);
        d.plemelj_mismatch = std::max(d.plemelj_mismatch, gap.norm_max());
      }
    for (int j = cl.wj0(); j <= cl.wj1(); ++j)
      for (int i : {cl.wi0(), cl.wi1()}) {
        Mat gap = pf.eval_unchecked(g.z(i, j)) - w.value(i, j);
        d.plemelj_mismatch = std::max(d.plemelj_mismatch, gap.norm_max());
      }
  }

  // (iii) interior invertibility of the continuation
  d.min_det_h = min_abs_det(hfield);

  out.g_field = MatrixField(g, ua.c.rank());
  if (d.min_det_h > opts.det_threshold) {
    MatrixField hinv = pointwise_inverse(hfield);
    out.g_field = mul(ua.c, mul(hinv, ub_inv));
    MatrixField resid = dbar_fd(out.g_field) + mul(ma, out.g_field) - mul(out.g_field, mb);
    double s = 0.0;
    for (int i = cl.wi0(); i <= cl.wi1(); ++i)
      for (int j = cl.wj0(); j <= cl.wj1(); ++j) {
        const cplx* p = resid.raw().data() + g.idx(i, j) * resid.fiber();
        for (size_t e = 0; e < resid.fiber(); ++e) s += std::norm(p[e]);
      }
    d.g_residual = std::sqrt(s * g.cell_area());
    for (int i = 0; i < g.ns; ++i)
      for (int j = 0; j < g.nt; ++j) {
        if (cl.in_window(i, j)) continue;
        Mat gap = out.g_field.value(i, j) - Mat::identity(out.g_field.rank());
        d.exterior_identity_gap = std::max(d.exterior_identity_gap, gap.norm_max());
      }
    d.pass = d.plemelj_mismatch <= tol && d.g_residual <= tol &&
             d.exterior_identity_gap <= tol;
    if (d.pass) {
      GaugeTransform gt{out.g_field, 0.0, true};
      gt.min_abs_det = min_abs_det(out.g_field);
      out.gauge = std::move(gt);
    }
  }
  return out;
}

// Grid leaf connection viewed as an ambient connection over the interval
// factor (leaf coordinates coincide with (x1, x) there); sixth-order
// interpolation off the lattice, zero outside the window interior.
inline CtaConnection connection_from_grid(const LeafConnection& a) {
  CtaConnection out;
  out.rank = a.rank();
  out.unitary = a.unitary;
  Box sup = a.support();
  out.x1_lo = sup.valid() ? sup.s0 : -1.0;
  out.x1_hi = sup.valid() ? sup.s1 : 1.0;
  auto wrap = [](MatrixField f) {
    auto fld = std::make_shared<MatrixField>(std::move(f));
    return [fld](double x1, const Vec2& x) -> Mat {
      const GridWindow& g = fld->grid();
      double xi = (x1 - g.s0) / g.hs, yj = (x[0] - g.t0) / g.ht;
      if (xi < 2.0 || xi > g.ns - 3.0 || yj < 2.0 || yj > g.nt - 3.0)
        return Mat(fld->rank(), fld->rank());
      return field_interp6(*fld, cplx(x1, x[0]));
    };
  };
  out.a1 = wrap(a.as);
  out.am.resize(1);
  out.am[0] = wrap(a.at);
  return out;
}

// ---- real parallel transport ---------------------------------------------------

// RK4 for P' = -coef(t) P, P(t0) = id.
inline Mat real_transport_ode(const std::function<Mat(double)>& coef, double t0,
                              double t1, int steps, int rank) {
  Mat p = Mat::identity(rank);
  double h = (t1 - t0) / steps;
  for (int k = 0; k < steps; ++k) {
    double t = t0 + k * h;
    auto rhs = [&](double tt, const Mat& m) {
      Mat r = coef(tt) * m;
      r *= cplx(-1.0, 0.0);
      return r;
    };
    Mat k1 = rhs(t, p);
    Mat k2 = rhs(t + 0.5 * h, p + cplx(0.5 * h) * k1);
    Mat k3 = rhs(t + 0.5 * h, p + cplx(0.5 * h) * k2);
    Mat k4 = rhs(t + h, p + cplx(h) * k3);
    p += cplx(h / 6.0) * (k1 + cplx(2.0) * k2 + cplx(2.0) * k3 + k4);
  }
  return p;
}

// Transport of the trivial frame along a transversal geodesic: the coef is
// A(gamma-dot) at fixed x1.
inline Mat real_parallel_transport(const CtaConnection& a, const GeodesicPath& path,
                                   double x1, int steps = 2048) {
  auto coef = [&](double t) -> Mat {
    GeodesicSample gs = path.at(std::min(std::max(t, 0.0), path.length));
    Mat acc(a.rank, a.rank);
    for (size_t c = 0; c < a.am.size(); ++c) {
      if (!a.am[c]) continue;
      Mat mc = a.am[c](x1, gs.x);
      mc *= cplx(gs.v[c], 0.0);
      acc += mc;
    }
    return acc;
  };
  return real_transport_ode(coef, 0.0, path.length, steps, a.rank);
}

// Transport along the horizontal line t = const of a leaf connection,
// cubic interpolation along the grid row.
inline Mat real_transport_horizontal(const LeafConnection& a, double t_line,
                                     int steps = 4096) {
  const GridWindow& g = a.grid();
  int j = g.nearest_j(t_line);
  auto coef = [&](double s) -> Mat {
    double xi = (s - g.s0) / g.hs;
    int i1 = std::min(std::max(int(std::floor(xi)), 1), g.ns - 3);
    double u = xi - i1;
    // 4-point Lagrange interpolation on the row
    double w0 = -u * (u - 1) * (u - 2) / 6.0, w1 = (u + 1) * (u - 1) * (u - 2) / 2.0;
    double w2 = -(u + 1) * u * (u - 2) / 2.0, w3 = (u + 1) * u * (u - 1) / 6.0;
    Mat acc = cplx(w0) * a.as.value(i1 - 1, j) + cplx(w1) * a.as.value(i1, j) +
              cplx(w2) * a.as.value(i1 + 1, j) + cplx(w3) * a.as.value(i1 + 2, j);
    return acc;
  };
  return real_transport_ode(coef, g.s0, g.s(g.ns - 1), steps, a.rank());
}

// ---- the dimension-one counterexample -----------------------------------------

struct CounterexampleResult {
  LeafConnection a;        // unitary connection with trivial complex transport
  MatrixField gauge;       // G = e^Psi with A(dbar) = -dbar G G^{-1}
  double curvature_sup = 0.0;
  double curvature_threshold = 0.0;
  double neighborhood_gap = 0.0;  // |A - A0| near z0
  int branch_retries = 0;
};

// Builds a unitary connection that is not gauge-trivial (curvature witness)
// but has the same complex parallel transport as the zero connection. The
// input A0 fixes the germ near z0.
inline CounterexampleResult counterexample_generate(const LeafConnection& a0, cplx z0,
                                                    double rho0 = 0.0,
                                                    const DbarOptions& opts = {}) {
  const GridWindow& g = a0.grid();
  MatrixField m0 = dzbar_component(a0);
  DbarWorkspace ws(g);
  auto inv = ws.solve_invertible(m0, opts);
  // normalize so that G0(z0) = id
  int i0 = g.nearest_i(z0.real()), j0 = g.nearest_j(z0.imag());
  Mat base_inv = inverse(inv.c.value(i0, j0));
  cplx z0s = g.z(i0, j0);
  Box bounds = g.bounds();
  double max_rho = 0.45 * std::min({z0s.real() - bounds.s0, bounds.s1 - z0s.real(),
                                    z0s.imag() - bounds.t0, bounds.t1 - z0s.imag()});
  double rho = rho0 > 0.0 ? rho0 : max_rho;
  require(rho > 4.0 * std::max(g.hs, g.ht), ErrorCode::InvalidArgument,
          "counterexample_generate: z0 too close to the window edge");

  CounterexampleResult out;
  const int r = a0.rank();
  for (int attempt = 0;; ++attempt) {
    require(attempt <= 5, ErrorCode::LogBranch,
            "counterexample_generate: matrix log branch failed after retries");
    bool ok = true;
    MatrixField psi(g, r);
    for (int i = 0; i < g.ns && ok; ++i)
      for (int j = 0; j < g.nt && ok; ++j) {
        double dist = std::abs(g.z(i, j) - z0s);
        if (dist >= rho) continue;
        double chi = smooth_step_down(2.0 * dist / rho - 1.0);  // 1 inside rho/2
        try {
          Mat lg = mat_log(inv.c.value(i, j) * base_inv);
          lg *= cplx(chi, 0.0);
          psi.set_value(i, j, lg);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::LogBranch) throw;
          ok = false;
        }
      }
    if (!ok) {
      rho *= 0.5;
      ++out.branch_retries;
      continue;
    }
    psi.set_support(tight_support(psi, 1e-300));
    MatrixField gf(g, r);
    for (int i = 0; i < g.ns; ++i)
      for (int j = 0; j < g.nt; ++j) gf.set_value(i, j, mat_exp(psi.value(i, j)));
    MatrixField dg = dbar_fd(gf);
    MatrixField mdbar(g, r);
    for (int i = 0; i < g.ns; ++i)
      for (int j = 0; j < g.nt; ++j) {
        Mat v = dg.value(i, j) * inverse(gf.value(i, j));
        v *= cplx(-1.0, 0.0);
        mdbar.set_value(i, j, v);
      }
    mdbar.set_support(tight_support(mdbar, 1e-11 * (norm_sup(mdbar) + 1e-300)));
    MatrixField mdz = adjoint(mdbar);
    mdz *= cplx(-1.0, 0.0);
    mdz.set_support(mdbar.support());
    out.a = connection_from_coefs(mdbar, mdz, true);
    out.gauge = gf;
    break;
  }

  // witnesses
  MatrixField f = curvature(out.a);
  out.curvature_sup = norm_sup(f);
  double a_sup = std::max(norm_sup(out.a.as), norm_sup(out.a.at));
  out.curvature_threshold = 1e-3 * a_sup * a_sup + 1e-6;
  // germ agreement near z0 (within the plateau)
  MatrixField m_new = dzbar_component(out.a);
  for (int i = 0; i < g.ns; ++i)
    for (int j = 0; j < g.nt; ++j) {
      if (std::abs(g.z(i, j) - z0s) > 0.4 * rho) continue;
      Mat gap = m_new.value(i, j) - m0.value(i, j);
      out.neighborhood_gap = std::max(out.neighborhood_gap, gap.norm_max());
    }
  return out;
}

// ---- Jacobi determinant consistency --------------------------------------------

struct DetConsistency {
  double gap_sup = 0.0;        // |det G - d| with d the scalar solution
  double min_abs_det_g = 0.0;
  double lower_bound = 0.0;    // exp(-max Re Psi) from the integrating factor
};

inline DetConsistency det_consistency(const LeafConnection& a, const LeafConnection& b,
                                      const MatrixField& gfield,
                                      const DbarOptions& opts = {}) {
  const GridWindow& g = gfield.grid();
  MatrixField q(g, 1);
  MatrixField ma = dzbar_component(a), mb = dzbar_component(b);
  for (int i = 0; i < g.ns; ++i)
    for (int j = 0; j < g.nt; ++j) {
      cplx tr = 0.0;
      for (int e = 0; e < a.rank(); ++e) tr += ma.at(i, j, e, e) - mb.at(i, j, e, e);
      q.at(i, j, 0, 0) = tr;
    }
  q.set_support(tight_support(q, 1e-11 * (norm_sup(q) + 1e-300)));
  DbarWorkspace ws(g);
  // d = 1 + w with dbar w + q w = -q, so that dbar d + q d = 0, d -> 1
  MatrixField minus_q = q * cplx(-1.0);
  minus_q.set_support(q.support());
  DbarResult wsol = ws.solve_source(&q, minus_q, opts);
  // integrating-factor bound via Psi = Pi(q)
  DbarResult psi = ws.solve_source(nullptr, q, opts);
  DetConsistency out;
  double max_re = 0.0;
  for (int i = 0; i < g.ns; ++i)
    for (int j = 0; j < g.nt; ++j) {
      cplx d = 1.0 + wsol.u.at(i, j, 0, 0);
      cplx dg = det(gfield.value(i, j));
      out.gap_sup = std::max(out.gap_sup, std::abs(dg - d));
      double ad = std::abs(dg);
      out.min_abs_det_g = (i == 0 && j == 0) ? ad : std::min(out.min_abs_det_g, ad);
      max_re = std::max(max_re, psi.u.at(i, j, 0, 0).real());
    }
  out.lower_bound = std::exp(-max_re);
  return out;
}

// ---- Stokes moments and gluing -------------------------------------------------

// C1 solves dbar C1 + A1(dbar) C1 = 0; C2 solves dz C2 - A2*(dz) C2 = 0,
// computed through the conjugate system dbar D - A2(dbar)^T D = 0, C2 = conj(D).
struct TransportPairSolution {
  LeafConnection a1, a2;
  MatrixField c1, c2;
  MatrixField c1_layer, c2_conj_layer;  // c1 = id + Pi(l1); conj(c2) = id + Pi(l2)
  double res1 = 0.0, res2 = 0.0;
  double min_det1 = 0.0, min_det2 = 0.0;
};

inline MatrixField transpose_field(const MatrixField& a) {
  MatrixField out(a.grid(), a.rank());
  const int r = a.rank();
  for (int i = 0; i < a.grid().ns; ++i)
    for (int j = 0; j < a.grid().nt; ++j)
      for (int x = 0; x < r; ++x)
        for (int y = 0; y < r; ++y) out.at(i, j, x, y) = a.at(i, j, y, x);
  out.set_support(a.support());
  return out;
}

inline MatrixField conj_field(const MatrixField& a) {
  MatrixField out(a.grid(), a.rank());
  for (size_t k = 0; k < a.raw().size(); ++k) out.raw()[k] = std::conj(a.raw()[k]);
  out.set_support(a.support());
  return out;
}

inline TransportPairSolution solve_transport_pair(const LeafConnection& a1,
                                                  const LeafConnection& a2,
                                                  const DbarOptions& opts = {}) {
  TransportPairSolution out;
  out.a1 = a1;
  out.a2 = a2;
  DbarWorkspace ws(a1.grid());
  auto s1 = ws.solve_invertible(dzbar_component(a1), opts);
  out.c1 = s1.c;
  out.c1_layer = s1.source_layer;
  out.res1 = s1.residual;
  out.min_det1 = s1.min_det;
  MatrixField m2 = transpose_field(dzbar_component(a2));
  m2 *= cplx(-1.0);
  m2.set_support(dzbar_component(a2).support());
  auto s2 = ws.solve_invertible(m2, opts);
  out.c2 = conj_field(s2.c);
  out.c2_conj_layer = s2.source_layer;
  out.res2 = s2.residual;
  out.min_det2 = s2.min_det;
  return out;
}

// dbar(C2* C1) = C2* (A2 - A1)(dbar) C1, algebraically exact in the factors.
inline MatrixField pair_dbar_phi(const TransportPairSolution& p) {
  MatrixField diff = dzbar_component(p.a2) - dzbar_component(p.a1);
  diff.set_support(Box::hull(p.a1.support(), p.a2.support()));
  MatrixField q = mul(adjoint(p.c2), mul(diff, p.c1));
  q.set_support(tight_support(q, 1e-11 * (norm_sup(q) + 1e-300)));
  return q;
}

struct StokesCheck {
  Mat lhs, rhs;
  double gap = 0.0;
};

// Area and contour sides of the moment identity
//   int_B H C2^*(A~_1 + i A~_t) C1 dA = -i oint_dB H C2^* C1 dz
// with H holomorphic; Simpson in the area and along each side.
inline StokesCheck stokes_moment_check(const TransportPairSolution& p,
                                       const std::function<cplx(cplx)>& hfun,
                                       double h_holo_tol = 1e-5) {
  const GridWindow& g = p.c1.grid();
  require((g.ns - 1) % 2 == 0 && (g.nt - 1) % 2 == 0, ErrorCode::InvalidArgument,
          "stokes_moment_check: even interval counts required");
  {
    MatrixField hs = MatrixField::sampled(g, 1, [&](double s, double t) {
      Mat m(1, 1);
      m(0, 0) = hfun(cplx(s, t));
      return m;
    });
    double hres = holomorphy_test(hs, g.bounds());
    double scale = norm_sup(hs) + 1e-30;
    require(hres <= h_holo_tol * scale * std::sqrt(g.bounds().width() * g.bounds().height()),
            ErrorCode::InvalidArgument, "stokes_moment_check: weight fails holomorphy test");
  }
  MatrixField q = pair_dbar_phi(p);  // C2* Atilde(dbar) C1
  const int r = q.rank();
  StokesCheck out;
  out.lhs = Mat(r, r);
  auto simpson_w = [](int k, int n) {
    return (k == 0 || k == n) ? 1.0 / 3.0 : (k % 2 == 1 ? 4.0 / 3.0 : 2.0 / 3.0);
  };
  for (int i = 0; i < g.ns; ++i)
    for (int j = 0; j < g.nt; ++j) {
      double w = simpson_w(i, g.ns - 1) * simpson_w(j, g.nt - 1) * g.cell_area();
      cplx hw = 2.0 * w * hfun(g.z(i, j));  // A~_1 + i A~_t = 2 A~(dbar)
      const cplx* pq = q.raw().data() + g.idx(i, j) * q.fiber();
      for (int e = 0; e < r * r; ++e) out.lhs.data()[e] += hw * pq[e];
    }
  MatrixField phi = mul(adjoint(p.c2), p.c1);
  Contour ct = grid_contour(g);
  std::vector<Mat> vals = read_contour_values(phi);
  out.rhs = Mat(r, r);
  for (size_t k = 0; k < vals.size(); ++k) {
    cplx wk = -kI * hfun(ct.z[k]) * ct.w[k];
    for (int e = 0; e < r * r; ++e) out.rhs.data()[e] += wk * vals[k].data()[e];
  }
  out.gap = (out.lhs - out.rhs).norm_max();
  return out;
}

struct GlueResult {
  MatrixField g;                      // recovered gauge on the grid
  std::vector<double> moment_norms;   // oint z^k C2* C1 dz, k = 0..K
  double residual = 0.0;              // FD residual of the gauge equation
  double identity_gap_contour = 0.0;  // sup |G - id| on the window contour
  double min_det_f = 0.0;
  // layers for off-grid evaluation
  MatrixField c1_layer, c2_conj_layer, uq_layer;
  const GridWindow* grid = nullptr;
};

// Plemelj gluing: F^{-1} is the entire continuation of C2* C1 evaluated
// through the volume form Phi - Pi(dbar Phi); G = C1 F C2* then satisfies
// the gauge equation with identity on and outside the window contour.
inline GlueResult gauge_glue(const TransportPairSolution& p, double moment_tol = 1e-4,
                             const DbarOptions& opts = {}) {
  const GridWindow& g = p.c1.grid();
  MatrixField phi = mul(adjoint(p.c2), p.c1);
  GlueResult out;
  // moment preconditions
  Contour ct = grid_contour(g);
  std::vector<Mat> vals = read_contour_values(phi);
  const int r = p.c1.rank();
  for (int k = 0; k <= kLaurentModes; ++k) {
    Mat mk(r, r);
    for (size_t q = 0; q < vals.size(); ++q) {
      cplx wk = std::pow(ct.z[q] - cplx(g.bounds().cs(), g.bounds().ct()), k) * ct.w[q];
      for (int e = 0; e < r * r; ++e) mk.data()[e] += wk * vals[q].data()[e];
    }
    out.moment_norms.push_back(mk.norm_max());
  }
  for (double mn : out.moment_norms)
    require(mn <= moment_tol, ErrorCode::MomentPrecondition,
            "gauge_glue: contour moments of C2* C1 do not vanish (" +
                std::to_string(mn) + ")");
  MatrixField q = pair_dbar_phi(p);
  DbarWorkspace ws(g);
  DbarResult uq = ws.solve_source(nullptr, q, opts);
  MatrixField finv = phi - uq.u;
  out.min_det_f = min_abs_det(finv);
  require(out.min_det_f > opts.det_threshold, ErrorCode::InvertibilityCertificate,
          "gauge_glue: continuation F not invertible");
  MatrixField f = pointwise_inverse(finv);
  out.g = mul(p.c1, mul(f, adjoint(p.c2)));
  MatrixField resid = dbar_fd(out.g) + mul(dzbar_component(p.a1), out.g) -
                      mul(out.g, dzbar_component(p.a2));
  out.residual = norm_l2(resid);
  std::vector<Mat> gvals = read_contour_values(out.g);
  for (const auto& m : gvals) {
    Mat d = m - Mat::identity(r);
    out.identity_gap_contour = std::max(out.identity_gap_contour, d.norm_max());
  }
  out.c1_layer = p.c1_layer;
  out.c2_conj_layer = p.c2_conj_layer;
  out.uq_layer = uq.source_layer;
  return out;
}

// Off-grid evaluation of the glued gauge: interior points interpolate the
// corrected grid solution (the integral layers carry cell-scale quadrature
// oscillation there); exterior points go through the integral layers.
inline Mat glue_eval(const GlueResult& gl, const GridWindow& g, cplx z) {
  double xi = (z.real() - g.s0) / g.hs;
  double yj = (z.imag() - g.t0) / g.ht;
  if (xi >= 2.0 && xi <= g.ns - 3.0 && yj >= 2.0 && yj <= g.nt - 3.0)
    return field_interp6(gl.g, z);
  const int r = gl.g.rank();
  std::vector<cplx> pt{z};
  Mat c1 = Mat::identity(r) + cauchy_eval_points(gl.c1_layer, pt)[0];
  Mat c2 = (Mat::identity(r) + cauchy_eval_points(gl.c2_conj_layer, pt)[0]).conjugate();
  Mat uq = cauchy_eval_points(gl.uq_layer, pt)[0];
  Mat finv = c2.adjoint() * c1 - uq;
  return c1 * inverse(finv) * c2.adjoint();
}

}  // namespace leafray

#endif
