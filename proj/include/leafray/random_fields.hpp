// leafray - seeded generators for bump fields, connections, and gauges
//
// All experiment randomness flows through Rng (splitmix64), so identical
// seeds reproduce identical fields bit for bit on a given platform.
#ifndef LEAFRAY_RANDOM_FIELDS_HPP
#define LEAFRAY_RANDOM_FIELDS_HPP

#include <vector>

#include "leafray/connection.hpp"

namespace leafray {

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed + 0x9e3779b97f4a7c15ull) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  double uniform() { return double(next() >> 11) * (1.0 / 9007199254740992.0); }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + int(next() % uint64_t(hi - lo + 1));
  }
  cplx unit_complex() {
    double th = uniform(0.0, 2.0 * kPi);
    return {std::cos(th), std::sin(th)};
  }
  Rng fork() { return Rng(next()); }

 private:
  uint64_t state_;
};

// C^6 compactly supported profile (1 - rho^2)^7: unit value at the center,
// vanishing to seventh order at the edge. Polynomial profiles keep the
// high-order derivatives that drive FD truncation and near-Nyquist energy
// orders of magnitude below the classical exp(-1/(1-rho^2)) bump at desk
// grids.
inline double bump_profile(double rho2) {
  if (rho2 >= 1.0) return 0.0;
  double q = 1.0 - rho2;
  double q3 = q * q * q;
  return q3 * q3 * q;
}
inline double bump_profile_drho2(double rho2) {  // d/d(rho^2)
  if (rho2 >= 1.0) return 0.0;
  double q = 1.0 - rho2;
  double q3 = q * q * q;
  return -7.0 * q3 * q3;  // -7 q^6
}

struct Bump {
  double cs = 0.0, ct = 0.0, rs = 1.0, rt = 1.0;
  double amp = 1.0;

  double operator()(double s, double t) const {
    double us = (s - cs) / rs, ut = (t - ct) / rt;
    return amp * bump_profile(us * us + ut * ut);
  }
  std::pair<double, double> grad(double s, double t) const {
    double us = (s - cs) / rs, ut = (t - ct) / rt;
    double d = amp * bump_profile_drho2(us * us + ut * ut);
    return {d * 2.0 * us / rs, d * 2.0 * ut / rt};
  }
  Box box() const { return {cs - rs, cs + rs, ct - rt, ct + rt}; }
};

// C^6 transition equal to 1 for x <= 0 and 0 for x >= 1: the normalized
// integral of u^6 (1-u)^6.
inline double smooth_step_down(double x) {
  if (x <= 0.0) return 1.0;
  if (x >= 1.0) return 0.0;
  // int_0^x u^6 (1-u)^6 du / B(7,7)
  static const double inv_b = 12012.0;  // 1 / B(7,7)
  double acc = 0.0;
  double sign = 1.0, binom = 1.0;
  for (int k = 0; k <= 6; ++k) {
    acc += sign * binom * std::pow(x, 7 + k) / (7 + k);
    sign = -sign;
    binom = binom * (6 - k) / (k + 1);
  }
  return 1.0 - acc * inv_b;
}

// Sum of matrix-coefficient bumps; smooth, exactly supported in `box`.
class MatrixBumpField {
 public:
  MatrixBumpField() = default;
  MatrixBumpField(Rng& rng, int rank, int nbumps, double amp, const Box& box,
                  bool skew_hermitian) {
    rank_ = rank;
    for (int k = 0; k < nbumps; ++k) {
      Bump b;
      b.rs = box.width() * rng.uniform(0.18, 0.3);
      b.rt = box.height() * rng.uniform(0.18, 0.3);
      b.cs = rng.uniform(box.s0 + b.rs, box.s1 - b.rs);
      b.ct = rng.uniform(box.t0 + b.rt, box.t1 - b.rt);
      b.amp = amp * rng.uniform(0.5, 1.0);
      Mat m(rank, rank);
      for (int i = 0; i < rank; ++i)
        for (int j = 0; j < rank; ++j)
          m(i, j) = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
      if (skew_hermitian) {
        Mat s = m - m.adjoint();
        s *= 0.5;
        m = s;
      }
      bumps_.push_back(b);
      coefs_.push_back(m);
      support_ = Box::hull(support_, b.box());
    }
    if (!support_.valid()) support_ = box;
  }

  int rank() const { return rank_; }
  const Box& support() const { return support_; }

  Mat operator()(double s, double t) const {
    Mat acc(rank_, rank_);
    for (size_t k = 0; k < bumps_.size(); ++k) {
      double v = bumps_[k](s, t);
      if (v == 0.0) continue;
      for (int e = 0; e < rank_ * rank_; ++e)
        acc.data()[e] += v * coefs_[k].data()[e];
    }
    return acc;
  }

  MatrixField sample(const GridWindow& g) const {
    MatrixField f = MatrixField::sampled(g, rank_, [&](double s, double t) {
      return (*this)(s, t);
    });
    f.set_support(support_);
    return f;
  }

 private:
  int rank_ = 1;
  std::vector<Bump> bumps_;
  std::vector<Mat> coefs_;
  Box support_;
};

inline MatrixField random_matrix_field(Rng& rng, const GridWindow& g, int rank,
                                       int nbumps, double amp, const Box& box) {
  MatrixBumpField f(rng, rank, nbumps, amp, box, false);
  return f.sample(g);
}

inline LeafConnection random_leaf_connection(Rng& rng, const GridWindow& g, int rank,
                                             int nbumps, double amp, const Box& box,
                                             bool unitary) {
  MatrixBumpField fs(rng, rank, nbumps, amp, box, unitary);
  MatrixBumpField ft(rng, rank, nbumps, amp, box, unitary);
  LeafConnection c{fs.sample(g), ft.sample(g), unitary};
  return c;
}

// G = exp(Psi) with Psi a bump field: smooth, invertible, identity outside
// the box; unitary when Psi is skew-Hermitian.
inline GaugeTransform random_gauge(Rng& rng, const GridWindow& g, int rank, int nbumps,
                                   double amp, const Box& box, bool unitary) {
  MatrixBumpField psi(rng, rank, nbumps, amp, box, unitary);
  MatrixField gf = MatrixField::sampled(g, rank, [&](double s, double t) {
    return mat_exp(psi(s, t));
  });
  gf.set_support(psi.support());
  return make_gauge(std::move(gf));
}

// Single-generator gauge G = exp(psi(z) S) with scalar bumps psi and a
// constant matrix S. Because S commutes with itself, dG = dpsi S G holds
// exactly, so G*A can be assembled analytically; with skew-Hermitian S the
// gauge is exactly unitary.
struct ScalarBumpGauge {
  std::vector<Bump> bumps;
  Mat generator;

  ScalarBumpGauge() = default;
  ScalarBumpGauge(Rng& rng, int rank, int nbumps, double amp, const Box& box,
                  bool unitary) {
    for (int k = 0; k < nbumps; ++k) {
      Bump b;
      b.rs = box.width() * rng.uniform(0.2, 0.35);
      b.rt = box.height() * rng.uniform(0.2, 0.35);
      b.cs = rng.uniform(box.s0 + b.rs, box.s1 - b.rs);
      b.ct = rng.uniform(box.t0 + b.rt, box.t1 - b.rt);
      b.amp = amp * rng.uniform(0.5, 1.0);
      bumps.push_back(b);
    }
    Mat m(rank, rank);
    for (int i = 0; i < rank; ++i)
      for (int j = 0; j < rank; ++j)
        m(i, j) = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    if (unitary) {
      Mat s = m - m.adjoint();
      s *= 0.5;
      m = s;
    }
    generator = m;
  }

  double psi(double s, double t) const {
    double v = 0.0;
    for (const auto& b : bumps) v += b(s, t);
    return v;
  }
  std::pair<double, double> grad_psi(double s, double t) const {
    double gs = 0.0, gt = 0.0;
    for (const auto& b : bumps) {
      auto [bs, bt] = b.grad(s, t);
      gs += bs;
      gt += bt;
    }
    return {gs, gt};
  }
  Mat value(double s, double t) const {
    Mat e = generator;
    e *= cplx(psi(s, t), 0.0);
    return mat_exp(e);
  }
  Box support() const {
    Box b;
    for (const auto& bb : bumps) b = Box::hull(b, bb.box());
    return b;
  }

  MatrixField sample(const GridWindow& g) const {
    MatrixField f = MatrixField::sampled(g, generator.rows(), [&](double s, double t) {
      return value(s, t);
    });
    f.set_support(support());
    return f;
  }
};

// Exact gauge pair A2 = G*A1 on a leaf grid: the derivative term is
// dpsi (x) S, assembled from the analytic bump gradients.
inline LeafConnection exact_gauge_pullback(const ScalarBumpGauge& gauge,
                                           const LeafConnection& a1) {
  const GridWindow& g = a1.grid();
  const int r = a1.rank();
  MatrixField as(g, r), at(g, r);
  for (int i = 0; i < g.ns; ++i)
    for (int j = 0; j < g.nt; ++j) {
      double s = g.s(i), t = g.t(j);
      Mat gv = gauge.value(s, t);
      Mat ginv = inverse(gv);
      auto [ps, pt] = gauge.grad_psi(s, t);
      Mat ds = gauge.generator;
      ds *= cplx(ps, 0.0);
      Mat dt = gauge.generator;
      dt *= cplx(pt, 0.0);
      as.set_value(i, j, ds + ginv * a1.as.value(i, j) * gv);
      at.set_value(i, j, dt + ginv * a1.at.value(i, j) * gv);
    }
  Box sup = Box::hull(a1.support(), gauge.support());
  as.set_support(sup);
  at.set_support(sup);
  bool unit = a1.unitary && (gauge.generator + gauge.generator.adjoint()).norm_max() <
                                kUnitaryTol;
  return LeafConnection{std::move(as), std::move(at), unit};
}

}  // namespace leafray

#endif
