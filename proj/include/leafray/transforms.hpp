// leafray - complex ray transform on bicharacteristic leaves of R x M
//
// A leaf at an inward boundary vector (x, v) is R x gamma identified with
// the z = s + i t plane, gamma the unit-speed geodesic of (M, g). Ambient
// data pulls back to the leaf grid and the twisted dbar solver produces the
// field whose window-contour restriction is the transform.
#ifndef LEAFRAY_TRANSFORMS_HPP
#define LEAFRAY_TRANSFORMS_HPP

#include "leafray/dbar.hpp"
#include "leafray/random_fields.hpp"
#include "leafray/tensor.hpp"

namespace leafray {

// Connection on (-T,T) x M given by coordinate-component callables.
struct CtaConnection {
  int rank = 1;
  bool unitary = false;
  std::function<Mat(double, const Vec2&)> a1;               // dx1 component
  std::vector<std::function<Mat(double, const Vec2&)>> am;  // transversal components
  double x1_lo = 0.0, x1_hi = 0.0;                          // declared x1 support
};

struct CtaLeaf {
  SimpleSurface surface;
  Vec2 base_x{0, 0}, base_v{0, 0};
  GeodesicPath path;
  double T = 0.0;
  Box window;       // [-T, T] x [0, L]
  GridWindow grid;  // covers the window; t-spacing divides L exactly

  LeafConnection pullback(const CtaConnection& a) const {
    const int r = a.rank;
    MatrixField as = MatrixField::sampled(grid, r, [&](double s, double t) {
      return a.a1 ? a.a1(s, path.at(t).x) : Mat(r, r);
    });
    MatrixField at(grid, r);
    for (int j = 0; j < grid.nt; ++j) {
      GeodesicSample gs = path.at(grid.t(j));
      for (int i = 0; i < grid.ns; ++i) {
        Mat acc(r, r);
        for (size_t c = 0; c < a.am.size(); ++c) {
          if (!a.am[c]) continue;
          Mat mc = a.am[c](grid.s(i), gs.x);
          mc *= cplx(gs.v[c], 0.0);
          acc += mc;
        }
        at.set_value(i, j, acc);
      }
    }
    as.set_support(tight_support(as, 1e-14 * (norm_sup(as) + 1e-300)));
    at.set_support(tight_support(at, 1e-14 * (norm_sup(at) + 1e-300)));
    LeafConnection out{std::move(as), std::move(at), a.unitary};
    return out;
  }

  // Leaf source (1/2) f((d_{x1} + i gamma-dot)^{(x) m}); the prefactor makes
  // the leafwise solutions match the transport equation on the sphere
  // bundle without further scaling.
  MatrixField pullback_source(const SymmetricTensorSource& f) const {
    MatrixField src(grid, f.rank);
    for (int j = 0; j < grid.nt; ++j) {
      GeodesicSample gs = path.at(grid.t(j));
      std::vector<cplx> w(size_t(f.dim), cplx(0.0));
      w[0] = 1.0;
      for (int c = 1; c < f.dim; ++c) w[size_t(c)] = kI * gs.v[size_t(c - 1)];
      for (int i = 0; i < grid.ns; ++i) {
        Mat val = f.at(grid.s(i), gs.x).contract(w);
        val *= cplx(0.5, 0.0);
        src.set_value(i, j, val);
      }
    }
    src.set_support(tight_support(src, 1e-14 * (norm_sup(src) + 1e-300)));
    return src;
  }
};

// Builds the leaf at (x, v); `snap_t` forces that arc length onto the
// t-lattice (used when evaluating the solution at an interior point of the
// geodesic). Throws for outward or trapped starts.
inline CtaLeaf build_cta_leaf(const SimpleSurface& surf, const Vec2& x, const Vec2& v,
                              double T, double h, double snap_t = -1.0) {
  CtaLeaf leaf;
  leaf.surface = surf;
  leaf.base_x = x;
  leaf.base_v = v;
  leaf.path = geodesic_trace(surf, x, v);
  leaf.T = T;
  double L = leaf.path.length;
  leaf.window = Box{-T, T, 0.0, L};
  GridWindow g;
  g.ns = 2 * std::max(2, int(std::lround(T / h))) + 1;
  g.hs = 2.0 * T / (g.ns - 1);
  g.s0 = -T;
  if (snap_t > 0.0 && snap_t < L) {
    int j0 = std::max(1, int(std::lround(snap_t / h)));
    g.ht = snap_t / j0;
    int tail = std::max(1, int(std::ceil((L - snap_t) / g.ht - 1e-12)));
    if ((j0 + tail) % 2 != 0) ++tail;  // even interval count for Simpson
    g.nt = j0 + tail + 1;
  } else {
    int intervals = std::max(2, 2 * int(std::lround(L / (2.0 * h))));
    g.nt = intervals + 1;
    g.ht = L / intervals;
  }
  g.t0 = 0.0;
  leaf.grid = g;
  return leaf;
}

// ---- boundary traces ---------------------------------------------------------

inline constexpr int kLaurentModes = 8;

struct BoundaryTrace {
  Contour contour;          // grid-aligned Simpson contour on the window box
  std::vector<Mat> values;  // solution samples along the contour
  std::vector<Mat> laurent;
  cplx laurent_center = 0.0;
  int m = 0;
  double T = 0.0;
  Vec2 base_x{0, 0}, base_v{0, 0};
  double solver_residual = 0.0;

  double norm_sup() const {
    double s = 0.0;
    for (const auto& v : values) s = std::max(s, v.norm_max());
    return s;
  }
  double laurent_tail_norm() const {
    double s = 0.0;
    for (const auto& c : laurent) s = std::max(s, c.norm_max());
    return s;
  }
  // closed-contour moment oint z^k u dz with the stored weights
  Mat contour_moment(const std::function<cplx(cplx)>& weight) const {
    Mat acc(values[0].rows(), values[0].cols());
    for (size_t k = 0; k < values.size(); ++k) {
      cplx wk = weight(contour.z[k]) * contour.w[k];
      for (int e = 0; e < acc.rows() * acc.cols(); ++e)
        acc.data()[e] += wk * values[k].data()[e];
    }
    return acc;
  }
};

// Rectangle contour whose samples coincide with the window's edge nodes.
inline Contour grid_contour(const GridWindow& g) {
  Contour c;
  Box b = g.bounds();
  c.center = cplx(b.cs(), b.ct());
  c.circumradius = std::hypot(0.5 * b.width(), 0.5 * b.height());
  auto side = [&](cplx p, cplx q, int n) {
    cplx dz = (q - p) / double(n);
    c.max_spacing = std::max(c.max_spacing, std::abs(dz));
    for (int k = 0; k <= n; ++k) {
      double sw = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      c.z.push_back(p + double(k) * dz);
      c.w.push_back(sw / 3.0 * dz);
    }
  };
  // Simpson needs even interval counts; grids are built with even ns-1, nt-1
  require((g.ns - 1) % 2 == 0 && (g.nt - 1) % 2 == 0, ErrorCode::InvalidArgument,
          "grid_contour: odd node counts required");
  cplx c1(b.s0, b.t0), c2(b.s1, b.t0), c3(b.s1, b.t1), c4(b.s0, b.t1);
  side(c1, c2, g.ns - 1);
  side(c2, c3, g.nt - 1);
  side(c3, c4, g.ns - 1);
  side(c4, c1, g.nt - 1);
  return c;
}

inline std::vector<Mat> read_contour_values(const MatrixField& u) {
  const GridWindow& g = u.grid();
  std::vector<Mat> v;
  v.reserve(2 * size_t(g.ns + g.nt));
  for (int i = 0; i < g.ns; ++i) v.push_back(u.value(i, 0));
  for (int j = 0; j < g.nt; ++j) v.push_back(u.value(g.ns - 1, j));
  for (int i = g.ns - 1; i >= 0; --i) v.push_back(u.value(i, g.nt - 1));
  for (int j = g.nt - 1; j >= 0; --j) v.push_back(u.value(0, j));
  return v;
}

struct RayTransformResult {
  BoundaryTrace trace;
  DbarResult solve;
  CtaLeaf leaf;
};

// The complex ray transform C_m f at (x, v): boundary restriction of the
// twisted dbar solution with the pulled-back tensor source.
inline RayTransformResult complex_ray_transform(
    const SimpleSurface& surf, const CtaConnection* a, const SymmetricTensorSource& f,
    const Vec2& x, const Vec2& v, double T, double h, const DbarOptions& opts = {}) {
  require(f.x1_lo > -T && f.x1_hi < T, ErrorCode::SupportMargin,
          "complex_ray_transform: source support leaves (-T, T) in x1");
  if (a != nullptr)
    require(a->x1_lo > -T && a->x1_hi < T, ErrorCode::SupportMargin,
            "complex_ray_transform: connection support leaves (-T, T) in x1");
  RayTransformResult out;
  out.leaf = build_cta_leaf(surf, x, v, T, h);
  MatrixField src = out.leaf.pullback_source(f);
  if (a != nullptr) {
    LeafConnection la = out.leaf.pullback(*a);
    out.solve = solve_dbar_source(la, src, opts);
  } else {
    DbarWorkspace ws(out.leaf.grid);
    out.solve = ws.solve_source(nullptr, src, opts);
  }
  BoundaryTrace& tr = out.trace;
  tr.contour = grid_contour(out.leaf.grid);
  tr.values = read_contour_values(out.solve.u);
  tr.laurent_center = cplx(out.leaf.window.cs(), out.leaf.window.ct());
  tr.laurent = laurent_moments(out.solve.source_layer, tr.laurent_center, kLaurentModes);
  tr.m = f.degree;
  tr.T = T;
  tr.base_x = x;
  tr.base_v = v;
  tr.solver_residual = out.solve.residual;
  return out;
}

// Exterior holomorphic representation pulled to the punctured disk:
// w -> u(d / w) = sum_k c_k (w / d)^k.
inline Mat exterior_representation(const BoundaryTrace& tr, double d, cplx w) {
  require(d > tr.contour.circumradius, ErrorCode::InvalidArgument,
          "exterior_representation: d inside the contour circumradius");
  require(w != 0.0 && std::abs(w) <= 1.0, ErrorCode::InvalidArgument,
          "exterior_representation: w outside the punctured disk");
  const int r = tr.laurent.empty() ? 1 : tr.laurent[0].rows();
  Mat acc(r, r);
  cplx ratio = w / d, pw = ratio;
  for (const auto& c : tr.laurent) {
    for (int e = 0; e < r * r; ++e) acc.data()[e] += pw * c.data()[e];
    pw *= ratio;
  }
  return acc;
}

// Exterior values straight from the contour integral (the second route of
// the two-path consistency check): u(z) = -(1/2 pi i) oint V/(zeta - z).
inline Mat exterior_eval_via_contour(const BoundaryTrace& tr, cplx z) {
  require(std::abs(z - tr.contour.center) > tr.contour.circumradius,
          ErrorCode::InvalidArgument, "exterior_eval_via_contour: z not exterior");
  const int r = tr.values[0].rows();
  Mat acc(r, r);
  for (size_t k = 0; k < tr.values.size(); ++k) {
    cplx kern = tr.contour.w[k] / (tr.contour.z[k] - z);
    for (int e = 0; e < r * r; ++e) acc.data()[e] += kern * tr.values[k].data()[e];
  }
  acc *= cplx(0.0, 0.5 / kPi);  // minus interior normalization
  return acc;
}

// ---- global transport field ----------------------------------------------------

struct TransportField {
  std::vector<double> x1;                       // s-lattice shared by all leaves
  std::vector<Vec2> points;
  int n_theta = 0;
  std::vector<std::vector<std::vector<Mat>>> u;  // [point][theta][x1]
  std::vector<double> leaf_residuals;            // per (point, theta)

  double max_residual() const {
    double s = 0.0;
    for (double r : leaf_residuals) s = std::max(s, r);
    return s;
  }
};

// Assembles u(x1, x, theta) by solving on the leaf through (x, theta) and
// reading the solution along the s-line of that point.
inline TransportField global_transport_solution(
    const SimpleSurface& surf, const CtaConnection* a, const SymmetricTensorSource& f,
    const std::vector<Vec2>& points, int n_theta, double T, double h,
    const DbarOptions& opts = {}) {
  TransportField out;
  out.points = points;
  out.n_theta = n_theta;
  out.u.resize(points.size());
  for (size_t pi = 0; pi < points.size(); ++pi) {
    out.u[pi].resize(size_t(n_theta));
    for (int k = 0; k < n_theta; ++k) {
      double th = 2.0 * kPi * k / n_theta;
      Vec2 x = points[pi];
      double cf = std::sqrt(surf.conformal_factor(x));
      Vec2 v{std::cos(th) / cf, std::sin(th) / cf};  // g-unit direction
      // entry point of the full geodesic through (x, v)
      GeodesicPath back = geodesic_trace(surf, x, {-v[0], -v[1]});
      Vec2 entry = back.exit_point();
      Vec2 ventry{-back.exit_velocity()[0], -back.exit_velocity()[1]};
      double t0 = back.length;
      CtaLeaf leaf = build_cta_leaf(surf, entry, ventry, T, h, t0);
      MatrixField src = leaf.pullback_source(f);
      DbarResult sol;
      if (a != nullptr) {
        LeafConnection la = leaf.pullback(*a);
        sol = solve_dbar_source(la, src, opts);
      } else {
        DbarWorkspace ws(leaf.grid);
        sol = ws.solve_source(nullptr, src, opts);
      }
      int j0 = t0 > 0.0 ? int(std::lround(t0 / leaf.grid.ht)) : 0;
      j0 = std::min(std::max(j0, 0), leaf.grid.nt - 1);
      std::vector<Mat>& row = out.u[pi][size_t(k)];
      row.reserve(size_t(leaf.grid.ns));
      for (int i = 0; i < leaf.grid.ns; ++i) row.push_back(sol.u.value(i, j0));
      out.leaf_residuals.push_back(sol.residual);
      if (out.x1.empty())
        for (int i = 0; i < leaf.grid.ns; ++i) out.x1.push_back(leaf.grid.s(i));
    }
  }
  return out;
}

// x1-average of the transport field (the zero-frequency Fourier slice),
// then the fiber Fourier profile per sample point.
inline std::vector<FourierDegree> transport_fiber_degrees(const TransportField& tf,
                                                          double tol) {
  std::vector<FourierDegree> out;
  double hs = tf.x1.size() > 1 ? tf.x1[1] - tf.x1[0] : 1.0;
  for (const auto& per_point : tf.u) {
    std::vector<Mat> fiber;
    for (const auto& row : per_point) {
      Mat acc(row[0].rows(), row[0].cols());
      for (const auto& m : row) acc += m;
      acc *= cplx(hs, 0.0);
      fiber.push_back(acc);
    }
    out.push_back(fourier_degree(fiber, tol));
  }
  return out;
}

// ---- attenuated X-ray reduction --------------------------------------------------

// Frequencies induced by the x1 grid after 4x zero padding.
inline std::vector<double> x1_frequencies(int n, double h, int pad = 4) {
  std::vector<double> out;
  int np = n * pad;
  for (int k = 0; k <= np / 2; ++k) out.push_back(2.0 * kPi * k / (np * h));
  return out;
}

// hat f(xi1, x) by uniform-grid quadrature over the declared x1 window.
inline cplx x1_fourier(const std::function<cplx(double, const Vec2&)>& f, double x1_lo,
                       double x1_hi, int n, double xi1, const Vec2& x) {
  double h = (x1_hi - x1_lo) / n;
  cplx acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    double w = (i == 0 || i == n) ? 0.5 : 1.0;
    double s = x1_lo + i * h;
    acc += w * std::exp(cplx(0.0, -xi1 * s)) * f(s, x);
  }
  return acc * h;
}

// int_0^L e^{xi1 t} hat f(xi1, gamma(t)) dt by composite Simpson.
inline cplx attenuated_xray(const SimpleSurface& surf,
                            const std::function<cplx(double, const Vec2&)>& f,
                            double x1_lo, double x1_hi, int n_x1, double xi1,
                            const Vec2& x, const Vec2& v, int n_t = 256) {
  GeodesicPath path = geodesic_trace(surf, x, v);
  int n = n_t + (n_t % 2);
  double ht = path.length / n;
  cplx acc = 0.0;
  for (int k = 0; k <= n; ++k) {
    double t = k * ht;
    double w = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    acc += w / 3.0 * std::exp(xi1 * t) *
           x1_fourier(f, x1_lo, x1_hi, n_x1, xi1, path.at(t).x);
  }
  return acc * ht;
}

// Same attenuated integral extracted from leaf boundary data: with the
// entire weight e^{-i xi1 z},
//   int_0^L e^{xi1 t} hat f(xi1, gamma(t)) dt = -i oint e^{-i xi1 z} u dz
// over the window contour (u the leafwise solution for m = 0).
inline cplx attenuated_xray_from_trace(const BoundaryTrace& tr, double xi1) {
  Mat m = tr.contour_moment(
      [xi1](cplx z) { return std::exp(cplx(0.0, -xi1) * z); });
  require(m.rows() == 1, ErrorCode::InvalidArgument,
          "attenuated_xray_from_trace: scalar traces only");
  return -kI * m(0, 0);
}

}  // namespace leafray

#endif
