// leafray - leaves of the 2-frame bundle over R^2 x M0
//
// A frame (mu, nu) at p spans the totally geodesic surface
//   phi(s, t) = (p_e + s mu' + t nu'_e, exp_{p_m}(t nu'_m)),
// mu', nu' the frame normalized by |mu|. The chart is isometric onto its
// image, so the leafwise machinery of the CTA case applies verbatim; data
// pulls back by pairing with the chart velocities.
#ifndef LEAFRAY_FRAMES_HPP
#define LEAFRAY_FRAMES_HPP

#include "leafray/holonomy.hpp"

namespace leafray {

struct FrameLeaf {
  AmbientSpace space;
  ComplexFrame frame;  // normalized: |mu| = 1
  GridWindow grid;     // symmetric window [-T1, T1] x [-T2, T2]
  GeodesicPath fwd, bwd;
  double nu_m_speed = 0.0;

  AmbientPoint chart(double s, double t) const {
    AmbientPoint p;
    p.e = add2(frame.base.e, add2(scale2(frame.mu, s), scale2(frame.nu_e, t)));
    if (space.surface.kind() == SimpleSurface::Kind::Interval) {
      p.m = {frame.base.m[0] + t * frame.nu_m[0], 0.0};
    } else if (nu_m_speed > 0.0) {
      p.m = t >= 0.0 ? fwd.at(nu_m_speed * t).x : bwd.at(-nu_m_speed * t).x;
    } else {
      p.m = frame.base.m;
    }
    return p;
  }

  Vec2 m_velocity(double t) const {
    if (space.surface.kind() == SimpleSurface::Kind::Interval) return frame.nu_m;
    if (nu_m_speed == 0.0) return {0.0, 0.0};
    if (t >= 0.0) return scale2(fwd.at(nu_m_speed * t).v, nu_m_speed);
    return scale2(bwd.at(-nu_m_speed * t).v, -nu_m_speed);
  }

  LeafConnection pullback(const AmbientConnection& a) const {
    const int r = a.rank;
    const int de = space.euclid_dim;
    const int dm = space.surface.dim();
    MatrixField as(grid, r), at(grid, r);
    for (int j = 0; j < grid.nt; ++j) {
      double t = grid.t(j);
      Vec2 mv = m_velocity(t);
      for (int i = 0; i < grid.ns; ++i) {
        AmbientPoint p = chart(grid.s(i), t);
        as.set_value(i, j, a.pair_euclid(p, frame.mu, de));
        Mat acc = a.pair_euclid(p, frame.nu_e, de);
        acc += a.pair_transversal(p, mv, de, dm);
        at.set_value(i, j, acc);
      }
    }
    as.set_support(tight_support(as, 1e-14 * (norm_sup(as) + 1e-300)));
    at.set_support(tight_support(at, 1e-14 * (norm_sup(at) + 1e-300)));
    return LeafConnection{std::move(as), std::move(at), a.unitary};
  }
};

inline FrameLeaf build_frame_leaf(const AmbientSpace& space, ComplexFrame frame,
                                  double t_half_s, double t_half_t, double h) {
  // normalize by |mu|
  double r = std::sqrt(dot2(frame.mu, frame.mu));
  require(r > 0.0, ErrorCode::FrameMismatch, "build_frame_leaf: mu = 0");
  frame.mu = scale2(frame.mu, 1.0 / r);
  frame.nu_e = scale2(frame.nu_e, 1.0 / r);
  frame.nu_m = scale2(frame.nu_m, 1.0 / r);
  validate_frame(space.surface, frame, 1e-9);

  FrameLeaf leaf;
  leaf.space = space;
  leaf.frame = frame;
  if (space.surface.kind() == SimpleSurface::Kind::Disk) {
    double sp = space.surface.metric_norm(frame.base.m, frame.nu_m);
    leaf.nu_m_speed = sp;
    if (sp > 0.0) {
      leaf.fwd = geodesic_trace(space.surface, frame.base.m, frame.nu_m);
      leaf.bwd = geodesic_trace(space.surface, frame.base.m, scale2(frame.nu_m, -1.0));
      require(sp * t_half_t <= std::min(leaf.fwd.length, leaf.bwd.length),
              ErrorCode::OutsideDomain,
              "build_frame_leaf: window exceeds the transversal geodesic");
    }
  } else {
    double reach = std::abs(frame.nu_m[0]) * t_half_t;
    require(frame.base.m[0] - reach >= 0.0 &&
                frame.base.m[0] + reach <= space.surface.extent(),
            ErrorCode::OutsideDomain, "build_frame_leaf: window leaves the interval");
  }
  GridWindow g;
  int hs_half = std::max(2, int(std::lround(t_half_s / h)));
  int ht_half = std::max(2, int(std::lround(t_half_t / h)));
  g.ns = 2 * hs_half + 1;
  g.nt = 2 * ht_half + 1;
  g.hs = t_half_s / hs_half;
  g.ht = t_half_t / ht_half;
  g.s0 = -t_half_s;
  g.t0 = -t_half_t;
  leaf.grid = g;
  return leaf;
}

// ---- ambient gauges ------------------------------------------------------------

struct AmbientGauge {
  int rank = 1;
  std::function<Mat(const AmbientPoint&)> g;
};

inline AmbientPoint offset_coord(AmbientPoint p, int coord, int de, double d) {
  if (coord < de) p.e[size_t(coord)] += d;
  else p.m[size_t(coord - de)] += d;
  return p;
}

// G*A in ambient coordinates: component c becomes G^{-1}(d_c G + A_c G),
// the derivative by fourth-order central differences of the callable.
inline AmbientConnection ambient_gauge_pullback(const AmbientGauge& gauge,
                                                const AmbientConnection& a, int de,
                                                int dm, double fd_step = 1.5e-3) {
  AmbientConnection out;
  out.rank = a.rank;
  out.unitary = false;  // recomputed by the caller if needed
  for (int c = 0; c < de + dm; ++c) {
    auto acomp = c < int(a.comps.size()) ? a.comps[size_t(c)] : nullptr;
    auto gfun = gauge.g;
    out.comps.push_back([gfun, acomp, c, de, fd_step](const AmbientPoint& p) -> Mat {
      Mat gv = gfun(p);
      Mat dg = gfun(offset_coord(p, c, de, -2 * fd_step)) -
               cplx(8.0) * gfun(offset_coord(p, c, de, -fd_step)) +
               cplx(8.0) * gfun(offset_coord(p, c, de, fd_step)) -
               gfun(offset_coord(p, c, de, 2 * fd_step));
      dg *= cplx(1.0 / (12.0 * fd_step), 0.0);
      Mat rhs = dg;
      if (acomp) rhs += acomp(p) * gv;
      return inverse(gv) * rhs;
    });
  }
  return out;
}

// Single-generator ambient gauge G = exp(psi(p) S) with psi a sum of
// product bumps. dG = dpsi S G exactly, so the gauge pair A2 = G*A1 can be
// assembled without numerical differentiation; S skew-Hermitian makes the
// gauge exactly unitary.
struct AmbientScalarGauge {
  struct ProductBump {
    std::array<double, 3> center{0, 0, 0};
    std::array<double, 3> radius{1, 1, 1};
    double amp = 1.0;
  };
  int de = 2, dm = 1;
  std::vector<ProductBump> bumps;
  Mat generator;

  AmbientScalarGauge() = default;
  AmbientScalarGauge(Rng& rng, int rank, int de_, int dm_, int nbumps, double amp,
                     const std::vector<std::pair<double, double>>& coord_boxes,
                     bool unitary)
      : de(de_), dm(dm_) {
    for (int k = 0; k < nbumps; ++k) {
      ProductBump b;
      for (int q = 0; q < de + dm; ++q) {
        double lo = coord_boxes[size_t(q)].first, hi = coord_boxes[size_t(q)].second;
        b.radius[size_t(q)] = (hi - lo) * rng.uniform(0.32, 0.45);
        b.center[size_t(q)] =
            rng.uniform(lo + b.radius[size_t(q)], hi - b.radius[size_t(q)]);
      }
      b.amp = amp * rng.uniform(0.5, 1.0);
      bumps.push_back(b);
    }
    Mat m(rank, rank);
    for (int i = 0; i < rank; ++i)
      for (int j = 0; j < rank; ++j)
        m(i, j) = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (unitary) {
      Mat s = m - m.adjoint();
      s *= 0.5;
      m = s;
    }
    generator = m;
  }

  double coord(const AmbientPoint& p, int q) const {
    return q < de ? p.e[size_t(q)] : p.m[size_t(q - de)];
  }
  double psi(const AmbientPoint& p) const {
    double acc = 0.0;
    for (const auto& b : bumps) {
      double v = b.amp;
      for (int q = 0; q < de + dm && v != 0.0; ++q) {
        double u = (coord(p, q) - b.center[size_t(q)]) / b.radius[size_t(q)];
        v *= bump_profile(u * u);
      }
      acc += v;
    }
    return acc;
  }
  std::array<double, 3> grad_psi(const AmbientPoint& p) const {
    std::array<double, 3> g{0, 0, 0};
    for (const auto& b : bumps) {
      double prof[3], dprof[3];
      for (int q = 0; q < de + dm; ++q) {
        double u = (coord(p, q) - b.center[size_t(q)]) / b.radius[size_t(q)];
        prof[q] = bump_profile(u * u);
        dprof[q] = bump_profile_drho2(u * u) * 2.0 * u / b.radius[size_t(q)];
      }
      for (int q = 0; q < de + dm; ++q) {
        double v = b.amp * dprof[q];
        for (int w = 0; w < de + dm; ++w)
          if (w != q) v *= prof[w];
        g[size_t(q)] += v;
      }
    }
    return g;
  }
  Mat value(const AmbientPoint& p) const {
    Mat e = generator;
    e *= cplx(psi(p), 0.0);
    return mat_exp(e);
  }
};

// A2 = G*A1 assembled from the analytic gradient of the scalar gauge.
inline AmbientConnection exact_ambient_gauge_pullback(const AmbientScalarGauge& gauge,
                                                      const AmbientConnection& a1) {
  AmbientConnection out;
  out.rank = a1.rank;
  Mat gen = gauge.generator;
  bool unit = a1.unitary && (gen + gen.adjoint()).norm_max() < kUnitaryTol;
  out.unitary = unit;
  int total = gauge.de + gauge.dm;
  for (int c = 0; c < total; ++c) {
    auto acomp = size_t(c) < a1.comps.size() ? a1.comps[size_t(c)] : nullptr;
    out.comps.push_back([gauge, acomp, c](const AmbientPoint& p) -> Mat {
      Mat gv = gauge.value(p);
      Mat term = gauge.generator;
      term *= cplx(gauge.grad_psi(p)[size_t(c)], 0.0);
      if (acomp) term += inverse(gv) * acomp(p) * gv;
      return term;
    });
  }
  return out;
}

// Product-of-1D-bumps matrix field on the ambient space; smooth, compactly
// supported in the per-coordinate boxes.
class AmbientBumpField {
 public:
  AmbientBumpField() = default;
  AmbientBumpField(Rng& rng, int rank, int de, int dm, int nbumps, double amp,
                   const std::vector<std::pair<double, double>>& coord_boxes,
                   bool skew_hermitian)
      : rank_(rank), de_(de), dm_(dm) {
    int dim = de + dm;
    for (int k = 0; k < nbumps; ++k) {
      std::vector<double> c(static_cast<size_t>(dim)), r(static_cast<size_t>(dim));
      for (int q = 0; q < dim; ++q) {
        double lo = coord_boxes[size_t(q)].first, hi = coord_boxes[size_t(q)].second;
        r[size_t(q)] = (hi - lo) * rng.uniform(0.3, 0.45);
        c[size_t(q)] = rng.uniform(lo + r[size_t(q)], hi - r[size_t(q)]);
      }
      Mat m(rank, rank);
      for (int i = 0; i < rank; ++i)
        for (int j = 0; j < rank; ++j)
          m(i, j) = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
      if (skew_hermitian) {
        Mat s = m - m.adjoint();
        s *= 0.5;
        m = s;
      }
      m *= cplx(amp * rng.uniform(0.5, 1.0), 0.0);
      centers_.push_back(std::move(c));
      radii_.push_back(std::move(r));
      coefs_.push_back(std::move(m));
    }
  }

  Mat operator()(const AmbientPoint& p) const {
    Mat acc(rank_, rank_);
    for (size_t k = 0; k < coefs_.size(); ++k) {
      double v = 1.0;
      for (int q = 0; q < de_ + dm_ && v != 0.0; ++q) {
        double x = q < de_ ? p.e[size_t(q)] : p.m[size_t(q - de_)];
        double u = (x - centers_[k][size_t(q)]) / radii_[k][size_t(q)];
        v *= bump_profile(u * u);
      }
      if (v == 0.0) continue;
      for (int e = 0; e < rank_ * rank_; ++e) acc.data()[e] += v * coefs_[k].data()[e];
    }
    return acc;
  }

 private:
  int rank_ = 1, de_ = 2, dm_ = 1;
  std::vector<std::vector<double>> centers_, radii_;
  std::vector<Mat> coefs_;
};

// ---- gluing on frames and the symmetry battery ----------------------------------

struct FrameGlue {
  FrameLeaf leaf;
  GlueResult glue;
  TransportPairSolution pair;
};

inline FrameGlue glue_on_frame(const AmbientSpace& space, const AmbientConnection& a1,
                               const AmbientConnection& a2, const ComplexFrame& frame,
                               double t_half_s, double t_half_t, double h,
                               double moment_tol = 1e-4, const DbarOptions& opts = {}) {
  FrameGlue out;
  out.leaf = build_frame_leaf(space, frame, t_half_s, t_half_t, h);
  LeafConnection la1 = out.leaf.pullback(a1);
  LeafConnection la2 = out.leaf.pullback(a2);
  out.pair = solve_transport_pair(la1, la2, opts);
  out.glue = gauge_glue(out.pair, moment_tol, opts);
  return out;
}

struct SymmetryGaps {
  double negation = 0.0;   // G(mu + i nu) vs G(-mu - i nu)
  double rotation = 0.0;   // planar frames vs e^{i theta} rotation
  double unitary = 0.0;    // G vs G^{-*} at the conjugate frame
  double theta = 0.0;
};

// Symmetry battery around one frame. The negation and
// conjugation maps are lattice-exact on the symmetric window; the rotated
// frame is compared at corresponding points through the off-grid evaluator.
inline SymmetryGaps symmetry_check(const AmbientSpace& space,
                                   const AmbientConnection& a1,
                                   const AmbientConnection& a2,
                                   const ComplexFrame& frame, double t_half,
                                   double h, double theta, bool unitary_pair,
                                   double moment_tol = 1e-4,
                                   const DbarOptions& opts = {}) {
  SymmetryGaps out;
  out.theta = theta;
  FrameGlue g0 = glue_on_frame(space, a1, a2, frame, t_half, t_half, h, moment_tol, opts);
  const GridWindow& g = g0.leaf.grid;

  {  // negation
    ComplexFrame f2 = frame;
    f2.mu = scale2(frame.mu, -1.0);
    f2.nu_e = scale2(frame.nu_e, -1.0);
    f2.nu_m = scale2(frame.nu_m, -1.0);
    FrameGlue g2 = glue_on_frame(space, a1, a2, f2, t_half, t_half, h, moment_tol, opts);
    for (int i = 0; i < g.ns; ++i)
      for (int j = 0; j < g.nt; ++j) {
        Mat gap = g2.glue.g.value(i, j) - g0.glue.g.value(g.ns - 1 - i, g.nt - 1 - j);
        out.negation = std::max(out.negation, gap.norm_max());
      }
  }

  if (std::abs(frame.nu_m[0]) < 1e-14 && std::abs(frame.nu_m[1]) < 1e-14) {
    // rotation, only for frames spanning the R^2 factor
    double c = std::cos(theta), s = std::sin(theta);
    ComplexFrame f3 = frame;
    f3.mu = add2(scale2(frame.mu, c), scale2(frame.nu_e, -s));
    f3.nu_e = add2(scale2(frame.mu, s), scale2(frame.nu_e, c));
    FrameGlue g3 = glue_on_frame(space, a1, a2, f3, t_half, t_half, h, moment_tol, opts);
    cplx rot(std::cos(theta), -std::sin(theta));  // z = e^{-i theta} z'
    int stride = std::max(1, (g.ns - 1) / 8);
    for (int i = 0; i < g.ns; i += stride)
      for (int j = 0; j < g.nt; j += stride) {
        cplx zp = g.z(i, j);
        Mat ref = glue_eval(g0.glue, g, rot * zp);
        Mat gap = g3.glue.g.value(i, j) - ref;
        out.rotation = std::max(out.rotation, gap.norm_max());
      }
  }

  if (unitary_pair) {
    ComplexFrame f4 = frame;
    f4.nu_e = scale2(frame.nu_e, -1.0);
    f4.nu_m = scale2(frame.nu_m, -1.0);
    FrameGlue g4 = glue_on_frame(space, a1, a2, f4, t_half, t_half, h, moment_tol, opts);
    for (int i = 0; i < g.ns; ++i)
      for (int j = 0; j < g.nt; ++j) {
        Mat gm = g4.glue.g.value(i, g.nt - 1 - j);  // z-bar node
        Mat gap = g0.glue.g.value(i, j) - inverse(gm).adjoint();
        out.unitary = std::max(out.unitary, gap.norm_max());
      }
  }
  return out;
}

}  // namespace leafray

#endif
