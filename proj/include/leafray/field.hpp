// leafray - matrix-valued fields on grid windows, derivatives, containers
#ifndef LEAFRAY_FIELD_HPP
#define LEAFRAY_FIELD_HPP

#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "leafray/grid.hpp"
#include "leafray/smallmat.hpp"

namespace leafray {

// Complex r x r matrix per node, node-major storage, row-major fiber.
class MatrixField {
 public:
  MatrixField() = default;
  MatrixField(GridWindow grid, int rank)
      : grid_(grid), rank_(rank), v_(grid.nodes() * size_t(rank) * rank) {}

  const GridWindow& grid() const { return grid_; }
  int rank() const { return rank_; }
  const Box& support() const { return support_; }
  void set_support(const Box& b) { support_ = b; }

  cplx& at(int i, int j, int a, int b) {
    return v_[(grid_.idx(i, j) * rank_ + a) * rank_ + b];
  }
  cplx at(int i, int j, int a, int b) const {
    return v_[(grid_.idx(i, j) * rank_ + a) * rank_ + b];
  }
  cplx* node(int i, int j) { return v_.data() + grid_.idx(i, j) * rank_ * rank_; }
  const cplx* node(int i, int j) const {
    return v_.data() + grid_.idx(i, j) * rank_ * rank_;
  }

  Mat value(int i, int j) const {
    Mat m(rank_, rank_);
    const cplx* p = node(i, j);
    for (int k = 0; k < rank_ * rank_; ++k) m.data()[k] = p[k];
    return m;
  }
  void set_value(int i, int j, const Mat& m) {
    cplx* p = node(i, j);
    for (int k = 0; k < rank_ * rank_; ++k) p[k] = m.data()[k];
  }

  std::vector<cplx>& raw() { return v_; }
  const std::vector<cplx>& raw() const { return v_; }
  size_t fiber() const { return size_t(rank_) * rank_; }

  static MatrixField identity(const GridWindow& g, int rank) {
    MatrixField f(g, rank);
    for (int i = 0; i < g.ns; ++i)
      for (int j = 0; j < g.nt; ++j)
        for (int a = 0; a < rank; ++a) f.at(i, j, a, a) = 1.0;
    return f;
  }

  static MatrixField sampled(const GridWindow& g, int rank,
                             const std::function<Mat(double, double)>& fn) {
    MatrixField f(g, rank);
    for (int i = 0; i < g.ns; ++i)
      for (int j = 0; j < g.nt; ++j) f.set_value(i, j, fn(g.s(i), g.t(j)));
    return f;
  }

  MatrixField& operator+=(const MatrixField& o) {
    for (size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
    return *this;
  }
  MatrixField& operator-=(const MatrixField& o) {
    for (size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
    return *this;
  }
  MatrixField& operator*=(cplx s) {
    for (auto& x : v_) x *= s;
    return *this;
  }
  friend MatrixField operator+(MatrixField a, const MatrixField& b) { return a += b; }
  friend MatrixField operator-(MatrixField a, const MatrixField& b) { return a -= b; }
  friend MatrixField operator*(MatrixField a, cplx s) { return a *= s; }
  friend MatrixField operator*(cplx s, MatrixField a) { return a *= s; }

  bool all_finite() const {
    for (const auto& x : v_)
      if (!finite(x)) return false;
    return true;
  }

 private:
  GridWindow grid_;
  int rank_ = 0;
  std::vector<cplx> v_;
  Box support_;
};

// Pointwise matrix product (left * right) at every node.
inline MatrixField mul(const MatrixField& a, const MatrixField& b) {
  int r = a.rank();
  MatrixField c(a.grid(), r);
  size_t n = a.grid().nodes();
  for (size_t q = 0; q < n; ++q) {
    const cplx* pa = a.raw().data() + q * r * r;
    const cplx* pb = b.raw().data() + q * r * r;
    cplx* pc = c.raw().data() + q * r * r;
    for (int i = 0; i < r; ++i)
      for (int k = 0; k < r; ++k) {
        cplx aik = pa[i * r + k];
        if (aik == 0.0) continue;
        for (int j = 0; j < r; ++j) pc[i * r + j] += aik * pb[k * r + j];
      }
  }
  return c;
}

inline MatrixField adjoint(const MatrixField& a) {
  int r = a.rank();
  MatrixField c(a.grid(), r);
  size_t n = a.grid().nodes();
  for (size_t q = 0; q < n; ++q) {
    const cplx* pa = a.raw().data() + q * r * r;
    cplx* pc = c.raw().data() + q * r * r;
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) pc[j * r + i] = std::conj(pa[i * r + j]);
  }
  return c;
}

inline MatrixField pointwise_inverse(const MatrixField& a) {
  MatrixField c(a.grid(), a.rank());
  for (int i = 0; i < a.grid().ns; ++i)
    for (int j = 0; j < a.grid().nt; ++j) c.set_value(i, j, inverse(a.value(i, j)));
  return c;
}

inline double min_abs_det(const MatrixField& a, int* where_i = nullptr,
                          int* where_j = nullptr) {
  double best = -1.0;
  for (int i = 0; i < a.grid().ns; ++i)
    for (int j = 0; j < a.grid().nt; ++j) {
      double d = std::abs(det(a.value(i, j)));
      if (best < 0.0 || d < best) {
        best = d;
        if (where_i) *where_i = i;
        if (where_j) *where_j = j;
      }
    }
  return best;
}

// Discrete L2 norm weighted by cell area, Frobenius in the fiber.
inline double norm_l2(const MatrixField& a) {
  double s = 0.0;
  for (const auto& x : a.raw()) s += std::norm(x);
  return std::sqrt(s * a.grid().cell_area());
}

inline double norm_sup(const MatrixField& a) {
  double s = 0.0;
  for (const auto& x : a.raw()) s = std::max(s, std::abs(x));
  return s;
}

inline double dist_sup(const MatrixField& a, const MatrixField& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.raw().size(); ++k)
    s = std::max(s, std::abs(a.raw()[k] - b.raw()[k]));
  return s;
}

// Bounding box of the nodes whose entries exceed `floor` in magnitude;
// invalid box when everything is below it.
inline Box tight_support(const MatrixField& a, double floor_abs) {
  const GridWindow& g = a.grid();
  int i0 = g.ns, i1 = -1, j0 = g.nt, j1 = -1;
  const size_t f = a.fiber();
  for (int i = 0; i < g.ns; ++i)
    for (int j = 0; j < g.nt; ++j) {
      const cplx* p = a.raw().data() + g.idx(i, j) * f;
      for (size_t e = 0; e < f; ++e)
        if (std::abs(p[e]) > floor_abs) {
          i0 = std::min(i0, i);
          i1 = std::max(i1, i);
          j0 = std::min(j0, j);
          j1 = std::max(j1, j);
          break;
        }
    }
  if (i1 < 0) return Box{};
  return Box{g.s(i0), g.s(i1), g.t(j0), g.t(j1)};
}

namespace fd {

// Fourth-order first-derivative weights: centered in the interior,
// one-sided five-point stencils at the two nodes nearest each edge.
inline void stencil(int n, int i, int* offs, double* w, double h) {
  const double c = 1.0 / (12.0 * h);
  if (i >= 2 && i <= n - 3) {
    offs[0] = -2; offs[1] = -1; offs[2] = 1; offs[3] = 2; offs[4] = 0;
    w[0] = c; w[1] = -8 * c; w[2] = 8 * c; w[3] = -c; w[4] = 0.0;
  } else if (i == 0) {
    offs[0] = 0; offs[1] = 1; offs[2] = 2; offs[3] = 3; offs[4] = 4;
    w[0] = -25 * c; w[1] = 48 * c; w[2] = -36 * c; w[3] = 16 * c; w[4] = -3 * c;
  } else if (i == 1) {
    offs[0] = -1; offs[1] = 0; offs[2] = 1; offs[3] = 2; offs[4] = 3;
    w[0] = -3 * c; w[1] = -10 * c; w[2] = 18 * c; w[3] = -6 * c; w[4] = c;
  } else if (i == n - 2) {
    offs[0] = 1; offs[1] = 0; offs[2] = -1; offs[3] = -2; offs[4] = -3;
    w[0] = 3 * c; w[1] = 10 * c; w[2] = -18 * c; w[3] = 6 * c; w[4] = -c;
  } else {  // i == n - 1
    offs[0] = 0; offs[1] = -1; offs[2] = -2; offs[3] = -3; offs[4] = -4;
    w[0] = 25 * c; w[1] = -48 * c; w[2] = 36 * c; w[3] = -16 * c; w[4] = 3 * c;
  }
}

}  // namespace fd

inline MatrixField d_s(const MatrixField& a) {
  const GridWindow& g = a.grid();
  MatrixField out(g, a.rank());
  size_t f = a.fiber();
  int offs[5];
  double w[5];
  for (int i = 0; i < g.ns; ++i) {
    fd::stencil(g.ns, i, offs, w, g.hs);
    for (int j = 0; j < g.nt; ++j) {
      cplx* po = out.raw().data() + g.idx(i, j) * f;
      for (int k = 0; k < 5; ++k) {
        if (w[k] == 0.0) continue;
        const cplx* ps = a.raw().data() + g.idx(i + offs[k], j) * f;
        for (size_t q = 0; q < f; ++q) po[q] += w[k] * ps[q];
      }
    }
  }
  return out;
}

inline MatrixField d_t(const MatrixField& a) {
  const GridWindow& g = a.grid();
  MatrixField out(g, a.rank());
  size_t f = a.fiber();
  int offs[5];
  double w[5];
  for (int j = 0; j < g.nt; ++j) {
    fd::stencil(g.nt, j, offs, w, g.ht);
    for (int i = 0; i < g.ns; ++i) {
      cplx* po = out.raw().data() + g.idx(i, j) * f;
      for (int k = 0; k < 5; ++k) {
        if (w[k] == 0.0) continue;
        const cplx* ps = a.raw().data() + g.idx(i, j + offs[k]) * f;
        for (size_t q = 0; q < f; ++q) po[q] += w[k] * ps[q];
      }
    }
  }
  return out;
}

// dbar = (d_s + i d_t) / 2 with the scheme above.
inline MatrixField dbar_fd(const MatrixField& a) {
  MatrixField ds = d_s(a), dt = d_t(a);
  MatrixField out(a.grid(), a.rank());
  for (size_t k = 0; k < out.raw().size(); ++k)
    out.raw()[k] = 0.5 * (ds.raw()[k] + kI * dt.raw()[k]);
  return out;
}

inline MatrixField dz_fd(const MatrixField& a) {
  MatrixField ds = d_s(a), dt = d_t(a);
  MatrixField out(a.grid(), a.rank());
  for (size_t k = 0; k < out.raw().size(); ++k)
    out.raw()[k] = 0.5 * (ds.raw()[k] - kI * dt.raw()[k]);
  return out;
}

// Sixth-order tensor-product Lagrange interpolation at an off-grid point;
// the point must sit at least two nodes inside the window.
inline Mat field_interp6(const MatrixField& f, cplx z) {
  const GridWindow& g = f.grid();
  double xi = (z.real() - g.s0) / g.hs;
  double yj = (z.imag() - g.t0) / g.ht;
  require(xi >= 2.0 && xi <= g.ns - 3.0 && yj >= 2.0 && yj <= g.nt - 3.0,
          ErrorCode::OutsideDomain, "field_interp6: point too close to the window edge");
  int i0 = std::min(std::max(int(std::floor(xi)) - 2, 0), g.ns - 6);
  int j0 = std::min(std::max(int(std::floor(yj)) - 2, 0), g.nt - 6);
  double u = xi - i0, v = yj - j0;
  double wu[6], wv[6];
  for (int m = 0; m < 6; ++m) {
    double pu = 1.0, pv = 1.0;
    for (int k = 0; k < 6; ++k) {
      if (k == m) continue;
      pu *= (u - k) / (m - k);
      pv *= (v - k) / (m - k);
    }
    wu[m] = pu;
    wv[m] = pv;
  }
  const int r = f.rank();
  Mat acc(r, r);
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) {
      double w = wu[a] * wv[b];
      if (w == 0.0) continue;
      const cplx* p = f.node(i0 + a, j0 + b);
      for (int e = 0; e < r * r; ++e) acc.data()[e] += w * p[e];
    }
  return acc;
}

// ---- container I/O -------------------------------------------------------

inline void save_field(const MatrixField& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  require(bool(os), ErrorCode::InvalidArgument, "save_field: cannot open " + path);
  const char magic[5] = "LRF1";
  os.write(magic, 4);
  auto wi = [&](int32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
  auto wd = [&](double v) { os.write(reinterpret_cast<const char*>(&v), 8); };
  wi(f.rank());
  wi(f.grid().ns);
  wi(f.grid().nt);
  wd(f.grid().hs);
  wd(f.grid().ht);
  wd(f.grid().s0);
  wd(f.grid().t0);
  wd(f.support().s0);
  wd(f.support().s1);
  wd(f.support().t0);
  wd(f.support().t1);
  for (const auto& z : f.raw()) {
    wd(z.real());
    wd(z.imag());
  }
}

inline MatrixField load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), ErrorCode::InvalidArgument, "load_field: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  require(std::memcmp(magic, "LRF1", 4) == 0, ErrorCode::InvalidArgument,
          "load_field: bad magic");
  auto ri = [&] { int32_t v; is.read(reinterpret_cast<char*>(&v), 4); return v; };
  auto rd = [&] { double v; is.read(reinterpret_cast<char*>(&v), 8); return v; };
  int rank = ri();
  GridWindow g;
  g.ns = ri();
  g.nt = ri();
  g.hs = rd();
  g.ht = rd();
  g.s0 = rd();
  g.t0 = rd();
  Box sup;
  sup.s0 = rd();
  sup.s1 = rd();
  sup.t0 = rd();
  sup.t1 = rd();
  MatrixField f(g, rank);
  f.set_support(sup);
  for (auto& z : f.raw()) {
    double re = rd(), im = rd();
    z = {re, im};
  }
  require(bool(is), ErrorCode::InvalidArgument, "load_field: truncated file");
  return f;
}

inline void save_field_csv(const MatrixField& f, const std::string& path) {
  std::ofstream os(path);
  require(bool(os), ErrorCode::InvalidArgument, "save_field_csv: cannot open " + path);
  os << "s,t,a,b,re,im\n";
  char buf[160];
  for (int i = 0; i < f.grid().ns; ++i)
    for (int j = 0; j < f.grid().nt; ++j)
      for (int a = 0; a < f.rank(); ++a)
        for (int b = 0; b < f.rank(); ++b) {
          cplx z = f.at(i, j, a, b);
          std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d,%d,%.17g,%.17g\n",
                        f.grid().s(i), f.grid().t(j), a, b, z.real(), z.imag());
          os << buf;
        }
}

}  // namespace leafray

#endif
