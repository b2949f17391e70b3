// leafray - solid Cauchy transform inverting dbar with decay at infinity
//
// u(z) = (1/pi) int f(tau) / (z - tau) dA(tau) satisfies dbar u = f.
// The kernel is integrated exactly over each grid cell against a
// piecewise-constant density, so the discrete operator is exact for
// cellwise-constant sources and has no singular-cell defect. On-grid
// application is a 2D convolution evaluated by FFT; off-grid targets use
// direct summation with a far-field expansion of the cell integral.
#ifndef LEAFRAY_CAUCHY_HPP
#define LEAFRAY_CAUCHY_HPP

#include <vector>

#include "leafray/fft.hpp"
#include "leafray/field.hpp"

namespace leafray {

// Exact integral of 1/(zeta - s) over the cell [-a,a] x [-b,b], via the
// contour form (i/2) oint sbar/(zeta - s) ds. Each side contributes a
// principal log of a ratio; the subtended angle of a side seen from an
// exterior point is below pi, so no branch correction is needed. The
// centered cell (zeta = 0) integrates to zero by symmetry.
inline cplx cauchy_cell_kernel(cplx zeta, double a, double b) {
  if (std::abs(zeta.real()) < 1e-14 * a && std::abs(zeta.imag()) < 1e-14 * b)
    return 0.0;
  const cplx c1(-a, -b), c2(a, -b), c3(a, b), c4(-a, b);
  cplx sum = 0.0;
  // bottom: sbar = s + 2ib
  sum += (zeta + cplx(0, 2 * b)) * std::log((zeta - c2) / (zeta - c1));
  // right: sbar = 2a - s
  sum += (-zeta + cplx(2 * a, 0)) * std::log((zeta - c3) / (zeta - c2));
  // top: sbar = s - 2ib
  sum += (zeta + cplx(0, -2 * b)) * std::log((zeta - c4) / (zeta - c3));
  // left: sbar = -2a - s
  sum += (-zeta + cplx(-2 * a, 0)) * std::log((zeta - c1) / (zeta - c4));
  return cplx(0.0, 0.5) * sum;
}

// Far-field expansion of the same cell integral:
//   W(zeta) = A [ 1/zeta + c3/zeta^3 + c5/zeta^5 + O((h/|zeta|)^7/|zeta|) ].
struct CellMoments {
  double area, c3, c5;
  CellMoments(double a, double b)
      : area(4.0 * a * b),
        c3((a * a - b * b) / 3.0),
        c5(a * a * a * a / 5.0 - 2.0 * a * a * b * b / 3.0 + b * b * b * b / 5.0) {}
};

// FFT-backed Cauchy transform bound to one grid window. Building the plan
// tabulates the exact cell kernel for every node offset and caches its
// transform; apply() is then two transforms per fiber entry.
class CauchyOp {
 public:
  explicit CauchyOp(const GridWindow& g)
      : g_(g),
        P_(next_pow2(2 * g.ns - 1)),
        Q_(next_pow2(2 * g.nt - 1)),
        plan_(P_, Q_),
        khat_(size_t(P_) * Q_) {
    const double a = 0.5 * g.hs, b = 0.5 * g.ht;
    for (int di = -(g.ns - 1); di <= g.ns - 1; ++di) {
      int pi = (di + P_) % P_;
      for (int dj = -(g.nt - 1); dj <= g.nt - 1; ++dj) {
        int qj = (dj + Q_) % Q_;
        khat_[size_t(pi) * Q_ + qj] =
            cauchy_cell_kernel(cplx(di * g.hs, dj * g.ht), a, b);
      }
    }
    plan_.forward(khat_);
  }

  const GridWindow& grid() const { return g_; }

  // On-grid transform of every fiber entry of f (same window required).
  MatrixField apply(const MatrixField& f) const {
    require(f.grid().same_lattice(g_), ErrorCode::InvalidArgument,
            "CauchyOp::apply: field lives on a different lattice");
    MatrixField out(g_, f.rank());
    std::vector<cplx> buf(size_t(P_) * Q_);
    const size_t fib = f.fiber();
    for (size_t e = 0; e < fib; ++e) {
      std::fill(buf.begin(), buf.end(), cplx(0.0));
      for (int i = 0; i < g_.ns; ++i)
        for (int j = 0; j < g_.nt; ++j)
          buf[size_t(i) * Q_ + j] = f.raw()[g_.idx(i, j) * fib + e];
      plan_.forward(buf);
      for (size_t k = 0; k < buf.size(); ++k) buf[k] *= khat_[k];
      plan_.inverse(buf);
      const double inv_pi = 1.0 / kPi;
      for (int i = 0; i < g_.ns; ++i)
        for (int j = 0; j < g_.nt; ++j)
          out.raw()[g_.idx(i, j) * fib + e] = inv_pi * buf[size_t(i) * Q_ + j];
    }
    return out;
  }

 private:
  GridWindow g_;
  int P_, Q_;
  Fft2Plan plan_;
  std::vector<cplx> khat_;
};

// Direct evaluation of (1/pi) sum f_j W(z - tau_j) at arbitrary targets.
// Summation runs over the declared support box of f when set. Cells far
// from the target use the three-term far-field expansion; near cells use
// the exact kernel.
inline std::vector<Mat> cauchy_eval_points(const MatrixField& f,
                                           const std::vector<cplx>& targets) {
  const GridWindow& g = f.grid();
  const double a = 0.5 * g.hs, b = 0.5 * g.ht;
  const CellMoments cm(a, b);
  const double near2 = 16.0 * (g.hs * g.hs + g.ht * g.ht);
  int i0 = 0, i1 = g.ns - 1, j0 = 0, j1 = g.nt - 1;
  if (f.support().valid()) {
    i0 = std::max(0, g.nearest_i(f.support().s0) - 1);
    i1 = std::min(g.ns - 1, g.nearest_i(f.support().s1) + 1);
    j0 = std::max(0, g.nearest_j(f.support().t0) - 1);
    j1 = std::min(g.nt - 1, g.nearest_j(f.support().t1) + 1);
  }
  const int r = f.rank();
  const size_t fib = f.fiber();
  std::vector<Mat> out(targets.size(), Mat(r, r));
  for (size_t p = 0; p < targets.size(); ++p) {
    cplx z = targets[p];
    Mat acc(r, r);
    for (int i = i0; i <= i1; ++i) {
      double ds = z.real() - g.s(i);
      for (int j = j0; j <= j1; ++j) {
        double dt = z.imag() - g.t(j);
        const cplx* fv = f.raw().data() + g.idx(i, j) * fib;
        bool zero = true;
        for (size_t e = 0; e < fib; ++e)
          if (fv[e] != 0.0) { zero = false; break; }
        if (zero) continue;
        cplx zeta(ds, dt);
        cplx w;
        if (ds * ds + dt * dt < near2) {
          w = cauchy_cell_kernel(zeta, a, b);
        } else {
          cplx inv = 1.0 / zeta;
          cplx inv2 = inv * inv;
          w = cm.area * inv * (1.0 + inv2 * (cm.c3 + cm.c5 * inv2));
        }
        for (size_t e = 0; e < fib; ++e) acc.data()[e] += w * fv[e];
      }
    }
    acc *= cplx(1.0 / kPi, 0.0);
    out[p] = acc;
  }
  return out;
}

// Laurent coefficients of u = (1/pi) int f/(z - tau) about `center`:
//   u(z) = sum_{k>=1} c_k (z - center)^{-k},
//   c_k = (1/pi) int f(tau) (tau - center)^{k-1} dA  (midpoint per cell).
inline std::vector<Mat> laurent_moments(const MatrixField& f, cplx center, int kmax) {
  const GridWindow& g = f.grid();
  const int r = f.rank();
  const size_t fib = f.fiber();
  std::vector<Mat> c(size_t(kmax), Mat(r, r));
  const double w = g.cell_area() / kPi;
  for (int i = 0; i < g.ns; ++i)
    for (int j = 0; j < g.nt; ++j) {
      const cplx* fv = f.raw().data() + g.idx(i, j) * fib;
      bool zero = true;
      for (size_t e = 0; e < fib; ++e)
        if (fv[e] != 0.0) { zero = false; break; }
      if (zero) continue;
      cplx tau = g.z(i, j) - center;
      cplx pw = w;
      for (int k = 0; k < kmax; ++k) {
        for (size_t e = 0; e < fib; ++e) c[size_t(k)].data()[e] += pw * fv[e];
        pw *= tau;
      }
    }
  return c;
}

}  // namespace leafray

#endif
