// leafray - connections on leaf windows, gauge action, curvature
#ifndef LEAFRAY_CONNECTION_HPP
#define LEAFRAY_CONNECTION_HPP

#include "leafray/field.hpp"

namespace leafray {

inline constexpr double kUnitaryTol = 1e-10;  // per-entry skew-Hermitian slack

// Matrix 1-form in leaf coordinates: A = A_s ds + A_t dt on one window.
struct LeafConnection {
  MatrixField as, at;
  bool unitary = false;

  int rank() const { return as.rank(); }
  const GridWindow& grid() const { return as.grid(); }
  Box support() const { return Box::hull(as.support(), at.support()); }

  static LeafConnection zero(const GridWindow& g, int rank) {
    LeafConnection c{MatrixField(g, rank), MatrixField(g, rank), true};
    return c;
  }
};

// Largest per-entry violation of A + A* = 0 over both components.
inline double unitarity_defect(const LeafConnection& a) {
  double worst = 0.0;
  for (const MatrixField* comp : {&a.as, &a.at}) {
    const int r = comp->rank();
    for (int i = 0; i < comp->grid().ns; ++i)
      for (int j = 0; j < comp->grid().nt; ++j) {
        const cplx* p = comp->node(i, j);
        for (int x = 0; x < r; ++x)
          for (int y = 0; y < r; ++y)
            worst = std::max(worst, std::abs(p[x * r + y] + std::conj(p[y * r + x])));
      }
  }
  return worst;
}

inline void validate_unitary(const LeafConnection& a) {
  if (!a.unitary) return;
  double d = unitarity_defect(a);
  require(d <= kUnitaryTol, ErrorCode::InvalidArgument,
          "connection flagged unitary has skew-Hermitian defect " + std::to_string(d));
}

// A(dbar) = (A_s + i A_t) / 2, the coefficient of the leafwise transport
// equation.
inline MatrixField dzbar_component(const LeafConnection& a) {
  MatrixField out(a.grid(), a.rank());
  for (size_t k = 0; k < out.raw().size(); ++k)
    out.raw()[k] = 0.5 * (a.as.raw()[k] + kI * a.at.raw()[k]);
  out.set_support(a.support());
  return out;
}

// A(dz) = (A_s - i A_t) / 2.
inline MatrixField dz_component(const LeafConnection& a) {
  MatrixField out(a.grid(), a.rank());
  for (size_t k = 0; k < out.raw().size(); ++k)
    out.raw()[k] = 0.5 * (a.as.raw()[k] - kI * a.at.raw()[k]);
  out.set_support(a.support());
  return out;
}

// Rebuild components from the two complex coefficients.
inline LeafConnection connection_from_coefs(const MatrixField& dbar_c,
                                            const MatrixField& dz_c, bool unitary) {
  LeafConnection a{MatrixField(dbar_c.grid(), dbar_c.rank()),
                   MatrixField(dbar_c.grid(), dbar_c.rank()), unitary};
  for (size_t k = 0; k < a.as.raw().size(); ++k) {
    a.as.raw()[k] = dz_c.raw()[k] + dbar_c.raw()[k];
    a.at.raw()[k] = kI * (dz_c.raw()[k] - dbar_c.raw()[k]);
  }
  a.as.set_support(Box::hull(dbar_c.support(), dz_c.support()));
  a.at.set_support(a.as.support());
  return a;
}

struct GaugeTransform {
  MatrixField g;
  double min_abs_det = 0.0;
  bool boundary_identity = false;
};

inline GaugeTransform make_gauge(MatrixField g, double det_threshold = 1e-8) {
  GaugeTransform out{std::move(g), 0.0, false};
  int wi = 0, wj = 0;
  out.min_abs_det = min_abs_det(out.g, &wi, &wj);
  require(out.min_abs_det > det_threshold, ErrorCode::SingularGauge,
          "gauge transform singular: min |det| = " + std::to_string(out.min_abs_det) +
              " at node (" + std::to_string(wi) + "," + std::to_string(wj) + ")");
  return out;
}

// G*A = G^{-1} dG + G^{-1} A G, componentwise, with grid derivatives of G.
inline LeafConnection gauge_pullback(const GaugeTransform& g, const LeafConnection& a,
                                     double det_threshold = 1e-8) {
  require(g.g.grid().same_lattice(a.grid()), ErrorCode::InvalidArgument,
          "gauge_pullback: gauge and connection on different grids");
  require(g.min_abs_det > det_threshold, ErrorCode::SingularGauge,
          "gauge_pullback: singular gauge");
  MatrixField ginv = pointwise_inverse(g.g);
  MatrixField dgs = d_s(g.g), dgt = d_t(g.g);
  LeafConnection out{mul(ginv, dgs + mul(a.as, g.g)),
                     mul(ginv, dgt + mul(a.at, g.g)),
                     false};
  out.as.set_support(Box::hull(a.support(), g.g.support()));
  out.at.set_support(out.as.support());
  // unitary gauge acting on a unitary connection stays unitary
  out.unitary = a.unitary && unitarity_defect(out) <= kUnitaryTol;
  return out;
}

// F = d_s A_t - d_t A_s + [A_s, A_t]; the gauge-covariant obstruction used
// to certify that a connection is not gauge-trivial.
inline MatrixField curvature(const LeafConnection& a) {
  MatrixField f = d_s(a.at) - d_t(a.as);
  MatrixField bracket = mul(a.as, a.at) - mul(a.at, a.as);
  f += bracket;
  f.set_support(a.support());
  return f;
}

}  // namespace leafray

#endif
