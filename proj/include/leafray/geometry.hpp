// leafray - simple transversal factors, geodesic flow, leaves, null frames
//
// Transversal factors are the closed interval with the Euclidean metric and
// the unit disk with a conformal metric g = c(x) e, c = (1 + kappa |x|^2)^-2
// for kappa in [0, 1/2] (a spherical cap strictly inside a hemisphere, hence
// simple). Geodesics run at unit g-speed with fixed-step RK4 and locate the
// boundary exit by bisection.
#ifndef LEAFRAY_GEOMETRY_HPP
#define LEAFRAY_GEOMETRY_HPP

#include <array>
#include <functional>

#include "leafray/connection.hpp"

namespace leafray {

using Vec2 = std::array<double, 2>;

inline double dot2(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }
inline Vec2 add2(const Vec2& a, const Vec2& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec2 scale2(const Vec2& a, double s) { return {a[0] * s, a[1] * s}; }

struct GeodesicSample {
  Vec2 x;
  Vec2 v;       // Euclidean velocity components; |v|_g = 1
  double len;   // g-arc length from the start
};

struct GeodesicPath {
  std::vector<GeodesicSample> samples;
  double length = 0.0;  // exit length L
  double step = 0.0;

  Vec2 exit_point() const { return samples.back().x; }
  Vec2 exit_velocity() const { return samples.back().v; }

  // Cubic Hermite interpolation between stored samples.
  GeodesicSample at(double t) const {
    if (t <= 0.0) return samples.front();
    if (t >= length) return samples.back();
    size_t k = std::min(size_t(t / step), samples.size() - 2);
    const GeodesicSample &a = samples[k], &b = samples[k + 1];
    double hseg = b.len - a.len;
    double u = (t - a.len) / hseg;
    double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
    double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
    GeodesicSample out;
    out.len = t;
    double d00 = (6 * u * u - 6 * u) / hseg, d10 = 3 * u * u - 4 * u + 1;
    double d01 = (6 * u - 6 * u * u) / hseg, d11 = 3 * u * u - 2 * u;
    for (int c = 0; c < 2; ++c) {
      out.x[c] = h00 * a.x[c] + h10 * hseg * a.v[c] + h01 * b.x[c] + h11 * hseg * b.v[c];
      out.v[c] = d00 * a.x[c] + d10 * a.v[c] + d01 * b.x[c] + d11 * b.v[c];
    }
    return out;
  }
};

// M0 factor: 1D interval [0, len] (Euclidean) or the conformal disk.
class SimpleSurface {
 public:
  enum class Kind { Interval, Disk };

  static SimpleSurface interval(double len) {
    SimpleSurface s;
    s.kind_ = Kind::Interval;
    s.extent_ = len;
    return s;
  }
  static SimpleSurface disk(double kappa, double radius = 1.0) {
    SimpleSurface s;
    s.kind_ = Kind::Disk;
    s.kappa_ = kappa;
    s.extent_ = radius;
    require(kappa >= 0.0 && kappa <= 0.5, ErrorCode::InvalidArgument,
            "SimpleSurface: kappa outside the shipped family [0, 1/2]");
    return s;
  }

  Kind kind() const { return kind_; }
  int dim() const { return kind_ == Kind::Interval ? 1 : 2; }
  double extent() const { return extent_; }
  double kappa() const { return kappa_; }

  double conformal_factor(const Vec2& x) const {
    if (kind_ == Kind::Interval || kappa_ == 0.0) return 1.0;
    double q = 1.0 + kappa_ * dot2(x, x);
    return 1.0 / (q * q);
  }
  // phi with c = e^{2 phi}; grad phi = -2 kappa x / (1 + kappa |x|^2)
  Vec2 grad_phi(const Vec2& x) const {
    if (kind_ == Kind::Interval || kappa_ == 0.0) return {0.0, 0.0};
    double q = 1.0 + kappa_ * dot2(x, x);
    return scale2(x, -2.0 * kappa_ / q);
  }

  double metric_norm(const Vec2& x, const Vec2& v) const {
    return std::sqrt(conformal_factor(x) * dot2(v, v));
  }

  double boundary_defect(const Vec2& x) const {
    if (kind_ == Kind::Interval) return std::max(-x[0], x[0] - extent_);
    return dot2(x, x) - extent_ * extent_;
  }
  bool inside(const Vec2& x) const { return boundary_defect(x) < 0.0; }

 private:
  Kind kind_ = Kind::Disk;
  double kappa_ = 0.0;
  double extent_ = 1.0;
};

namespace detail {

struct GeoState {
  Vec2 x, v;
};

// Unit-speed geodesic field for the conformal metric:
//   x' = v,  v' = -2 (v . grad phi) v + |v|_e^2 grad phi.
inline GeoState geo_rhs(const SimpleSurface& s, const GeoState& st) {
  Vec2 gp = s.grad_phi(st.x);
  double vg = dot2(st.v, gp);
  double v2 = dot2(st.v, st.v);
  GeoState d;
  d.x = st.v;
  d.v = add2(scale2(st.v, -2.0 * vg), scale2(gp, v2));
  return d;
}

inline GeoState rk4_step(const SimpleSurface& s, const GeoState& st, double h) {
  GeoState k1 = geo_rhs(s, st);
  GeoState m2{add2(st.x, scale2(k1.x, 0.5 * h)), add2(st.v, scale2(k1.v, 0.5 * h))};
  GeoState k2 = geo_rhs(s, m2);
  GeoState m3{add2(st.x, scale2(k2.x, 0.5 * h)), add2(st.v, scale2(k2.v, 0.5 * h))};
  GeoState k3 = geo_rhs(s, m3);
  GeoState m4{add2(st.x, scale2(k3.x, h)), add2(st.v, scale2(k3.v, h))};
  GeoState k4 = geo_rhs(s, m4);
  GeoState out;
  for (int c = 0; c < 2; ++c) {
    out.x[c] = st.x[c] + h / 6.0 * (k1.x[c] + 2 * k2.x[c] + 2 * k3.x[c] + k4.x[c]);
    out.v[c] = st.v[c] + h / 6.0 * (k1.v[c] + 2 * k2.v[c] + 2 * k3.v[c] + k4.v[c]);
  }
  return out;
}

}  // namespace detail

inline constexpr double kGeoStep = 1e-3;       // fixed RK4 arc-length step
inline constexpr double kExitBisectTol = 1e-10;
inline constexpr double kMaxGeodesicLength = 24.0;  // trapped-geodesic guard

// Traces the maximal unit-speed geodesic from x in direction v until it
// exits the surface. v is normalized to unit g-norm; x may be on the
// boundary (inward v) or interior.
inline GeodesicPath geodesic_trace(const SimpleSurface& s, Vec2 x, Vec2 v,
                                   double step = kGeoStep) {
  double vn = s.metric_norm(x, v);
  require(vn > 0.0, ErrorCode::NonUnitVector, "geodesic_trace: zero direction");
  v = scale2(v, 1.0 / vn);
  require(s.boundary_defect(x) <= 1e-12, ErrorCode::OutsideDomain,
          "geodesic_trace: start outside the surface");

  if (s.kind() == SimpleSurface::Kind::Interval) {
    // 1D factor: straight parametrization, exit at an endpoint.
    GeodesicPath p;
    p.step = step;
    double dir = v[0] > 0 ? 1.0 : -1.0;
    double dist = dir > 0 ? s.extent() - x[0] : x[0];
    int n = std::max(2, int(std::ceil(dist / step)));
    for (int k = 0; k <= n; ++k) {
      double t = dist * k / n;
      p.samples.push_back({{x[0] + dir * t, 0.0}, {dir, 0.0}, t});
    }
    p.length = dist;
    p.step = dist / n;
    return p;
  }

  GeodesicPath p;
  p.step = step;
  detail::GeoState st{x, v};
  p.samples.push_back({st.x, st.v, 0.0});
  double t = 0.0;
  while (t < kMaxGeodesicLength) {
    detail::GeoState nx = detail::rk4_step(s, st, step);
    if (s.boundary_defect(nx.x) >= 0.0) {
      // bisection on the step fraction
      double lo = 0.0, hi = 1.0;
      detail::GeoState mid = nx;
      while (hi - lo > kExitBisectTol) {
        double md = 0.5 * (lo + hi);
        mid = detail::rk4_step(s, st, step * md);
        if (s.boundary_defect(mid.x) >= 0.0) hi = md;
        else lo = md;
      }
      mid = detail::rk4_step(s, st, step * hi);
      t += step * hi;
      p.samples.push_back({mid.x, mid.v, t});
      p.length = t;
      // uniform sample spacing is assumed by at(); last short interval is fine
      return p;
    }
    st = nx;
    t += step;
    p.samples.push_back({st.x, st.v, t});
  }
  fail(ErrorCode::TrappedGeodesic, "geodesic_trace: no exit before max length");
}

// Levi-Civita transport of w along the path (conformal metric):
//   w' = -[(xdot . grad phi) w + (w . grad phi) xdot - (xdot . w) grad phi].
inline Vec2 parallel_transport(const SimpleSurface& s, const GeodesicPath& path,
                               Vec2 w, double upto = -1.0) {
  if (s.kind() == SimpleSurface::Kind::Interval || s.kappa() == 0.0) return w;
  double tend = upto < 0.0 ? path.length : upto;
  auto rhs = [&](double t, const Vec2& wv) -> Vec2 {
    GeodesicSample g = path.at(t);
    Vec2 gp = s.grad_phi(g.x);
    double a = dot2(g.v, gp), b = dot2(wv, gp), c = dot2(g.v, wv);
    return {-(a * wv[0] + b * g.v[0] - c * gp[0]),
            -(a * wv[1] + b * g.v[1] - c * gp[1])};
  };
  double h = path.step;
  double t = 0.0;
  while (t < tend) {
    double hh = std::min(h, tend - t);
    Vec2 k1 = rhs(t, w);
    Vec2 k2 = rhs(t + 0.5 * hh, add2(w, scale2(k1, 0.5 * hh)));
    Vec2 k3 = rhs(t + 0.5 * hh, add2(w, scale2(k2, 0.5 * hh)));
    Vec2 k4 = rhs(t + hh, add2(w, scale2(k3, hh)));
    for (int c = 0; c < 2; ++c)
      w[c] += hh / 6.0 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]);
    t += hh;
  }
  return w;
}

// ---- ambient product spaces ------------------------------------------------

// Point of R^de x M0 with de in {1, 2}; e holds the Euclidean coordinates,
// m the transversal ones (1 or 2 of them).
struct AmbientPoint {
  Vec2 e{0.0, 0.0};
  Vec2 m{0.0, 0.0};
};

struct AmbientSpace {
  int euclid_dim = 1;  // 1 for the CTA line, 2 for the plane of frames
  SimpleSurface surface = SimpleSurface::disk(0.0);

  int dim() const { return euclid_dim + surface.dim(); }
};

// Matrix 1-form on the ambient product, given by per-coordinate component
// callables ordered as (e coords..., m coords...).
struct AmbientConnection {
  int rank = 1;
  bool unitary = false;
  std::vector<std::function<Mat(const AmbientPoint&)>> comps;
  Box support;  // in leaf-window coordinates after pullback; validated there

  Mat pair_euclid(const AmbientPoint& p, const Vec2& dir, int de) const {
    Mat acc(rank, rank);
    for (int c = 0; c < de; ++c) {
      if (dir[c] == 0.0 || size_t(c) >= comps.size() || !comps[size_t(c)]) continue;
      Mat m = comps[size_t(c)](p);
      m *= cplx(dir[c], 0.0);
      acc += m;
    }
    return acc;
  }
  Mat pair_transversal(const AmbientPoint& p, const Vec2& dir, int de, int dm) const {
    Mat acc(rank, rank);
    for (int c = 0; c < dm; ++c) {
      if (dir[c] == 0.0 || size_t(de + c) >= comps.size() || !comps[size_t(de + c)])
        continue;
      Mat m = comps[size_t(de + c)](p);
      m *= cplx(dir[c], 0.0);
      acc += m;
    }
    return acc;
  }
};

// ---- null frames -------------------------------------------------------------

// A 2-frame mu + i nu with |mu + i nu|^2 = 0 under the bilinear extension:
// mu in the R^2 factor, nu split into its Euclidean and transversal parts.
struct ComplexFrame {
  AmbientPoint base;
  Vec2 mu{0.0, 0.0};
  Vec2 nu_e{0.0, 0.0};
  Vec2 nu_m{0.0, 0.0};
};

struct FrameDefect {
  double norm_gap;   // <mu,mu> - <nu,nu>
  double ortho_gap;  // <mu,nu>
};

inline FrameDefect frame_defect(const SimpleSurface& s, const ComplexFrame& f) {
  double c = s.conformal_factor(f.base.m);
  double mu2 = dot2(f.mu, f.mu);
  double nu2 = dot2(f.nu_e, f.nu_e) + c * dot2(f.nu_m, f.nu_m);
  double ortho = dot2(f.mu, f.nu_e);  // mu lives in the R^2 factor only
  return {mu2 - nu2, ortho};
}

inline void validate_frame(const SimpleSurface& s, const ComplexFrame& f,
                           double tol = 1e-10) {
  FrameDefect d = frame_defect(s, f);
  require(std::abs(d.norm_gap) <= tol && std::abs(d.ortho_gap) <= tol,
          ErrorCode::FrameMismatch, "ComplexFrame: |mu+i nu|^2 != 0");
}

// The holomorphic family of null frames indexed by t in C \ {0}:
//   mu(t)   = -Im(t - 1/t)/2 d1 - Re(t + 1/t)/2 d2
//   nu+-(t) =  Re(t - 1/t)/2 d1 - Im(t + 1/t)/2 d2 +- v.
inline ComplexFrame frame_family(const AmbientPoint& base, const Vec2& v_unit,
                                 cplx t, int sign) {
  require(t != 0.0, ErrorCode::InvalidArgument, "frame_family: t must be nonzero");
  cplx tm = t - 1.0 / t, tp = t + 1.0 / t;
  ComplexFrame f;
  f.base = base;
  f.mu = {-0.5 * tm.imag(), -0.5 * tp.real()};
  f.nu_e = {0.5 * tm.real(), -0.5 * tp.imag()};
  f.nu_m = scale2(v_unit, sign >= 0 ? 1.0 : -1.0);
  return f;
}

// |mu(t)| = (1 + 1/|t|^2) |t|.
inline double frame_family_radius(cplx t) {
  double r2 = std::norm(t);
  return (1.0 + 1.0 / r2) * std::sqrt(r2);
}

// ---- complexified geodesic derivative ---------------------------------------

// Central-difference evaluation of the complexified geodesic derivative of a
// frame function F at the given frame: d/dt along the mu-geodesic plus i
// times d/dt along the nu-geodesic, the frame moving by parallel transport.
inline Mat complexified_x_apply(
    const AmbientSpace& space, const std::function<Mat(const ComplexFrame&)>& fn,
    const ComplexFrame& frame, double delta = 1e-4) {
  const SimpleSurface& surf = space.surface;

  auto advance_mu = [&](double tau) {
    ComplexFrame f = frame;
    f.base.e = add2(f.base.e, scale2(frame.mu, tau));
    return f;
  };
  auto advance_nu = [&](double tau) {
    ComplexFrame f = frame;
    f.base.e = add2(f.base.e, scale2(frame.nu_e, tau));
    if (surf.kind() == SimpleSurface::Kind::Interval) {
      f.base.m[0] += tau * frame.nu_m[0];
    } else if (frame.nu_m[0] != 0.0 || frame.nu_m[1] != 0.0) {
      double speed = surf.metric_norm(frame.base.m, frame.nu_m);
      GeodesicPath p = geodesic_trace(surf, frame.base.m, frame.nu_m);
      double arc = std::abs(tau) * speed;
      require(arc <= p.length, ErrorCode::OutsideDomain,
              "complexified_x_apply: step leaves the surface");
      GeodesicSample gs = p.at(arc);
      if (tau >= 0.0) {
        f.base.m = gs.x;
        f.nu_m = scale2(gs.v, speed);
      } else {
        // trace backwards
        GeodesicPath pb = geodesic_trace(surf, frame.base.m, scale2(frame.nu_m, -1.0));
        GeodesicSample gb = pb.at(arc);
        f.base.m = gb.x;
        f.nu_m = scale2(gb.v, -speed);
      }
    }
    return f;
  };

  Mat dmu = fn(advance_mu(delta)) - fn(advance_mu(-delta));
  dmu *= cplx(0.5 / delta, 0.0);
  Mat dnu = fn(advance_nu(delta)) - fn(advance_nu(-delta));
  dnu *= cplx(0.5 / delta, 0.0);
  return dmu + kI * dnu;
}

}  // namespace leafray

#endif
