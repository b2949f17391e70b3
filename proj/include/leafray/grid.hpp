// leafray - rectangular grids in leaf coordinates z = s + i t
#ifndef LEAFRAY_GRID_HPP
#define LEAFRAY_GRID_HPP

#include <cmath>
#include <vector>

#include "leafray/core.hpp"

namespace leafray {

struct Box {
  double s0 = 0.0, s1 = 0.0, t0 = 0.0, t1 = 0.0;

  double width() const { return s1 - s0; }
  double height() const { return t1 - t0; }
  double cs() const { return 0.5 * (s0 + s1); }
  double ct() const { return 0.5 * (t0 + t1); }
  bool valid() const { return s1 > s0 && t1 > t0; }
  bool contains(double s, double t) const {
    return s >= s0 && s <= s1 && t >= t0 && t <= t1;
  }
  bool contains(const Box& o) const {
    return o.s0 >= s0 && o.s1 <= s1 && o.t0 >= t0 && o.t1 <= t1;
  }
  Box scaled_about_center(double f) const {
    double hs = 0.5 * f * width(), ht = 0.5 * f * height();
    return {cs() - hs, cs() + hs, ct() - ht, ct() + ht};
  }
  static Box hull(const Box& a, const Box& b) {
    if (!a.valid()) return b;
    if (!b.valid()) return a;
    return {std::min(a.s0, b.s0), std::max(a.s1, b.s1),
            std::min(a.t0, b.t0), std::max(a.t1, b.t1)};
  }
};

// Node lattice on a rectangle; node (i, j) sits at (s0 + i hs, t0 + j ht).
struct GridWindow {
  double s0 = 0.0, t0 = 0.0;
  double hs = 0.0, ht = 0.0;
  int ns = 0, nt = 0;

  static GridWindow over(const Box& b, double target_h) {
    GridWindow g;
    g.ns = std::max(2, int(std::lround(b.width() / target_h))) + 1;
    g.nt = std::max(2, int(std::lround(b.height() / target_h))) + 1;
    g.hs = b.width() / (g.ns - 1);
    g.ht = b.height() / (g.nt - 1);
    g.s0 = b.s0;
    g.t0 = b.t0;
    return g;
  }

  double s(int i) const { return s0 + i * hs; }
  double t(int j) const { return t0 + j * ht; }
  cplx z(int i, int j) const { return {s(i), t(j)}; }
  size_t nodes() const { return size_t(ns) * nt; }
  size_t idx(int i, int j) const { return size_t(i) * nt + j; }
  double cell_area() const { return hs * ht; }
  Box bounds() const { return {s0, s(ns - 1), t0, t(nt - 1)}; }

  bool same_lattice(const GridWindow& o) const {
    return ns == o.ns && nt == o.nt && std::abs(s0 - o.s0) < 1e-12 &&
           std::abs(t0 - o.t0) < 1e-12 && std::abs(hs - o.hs) < 1e-12 &&
           std::abs(ht - o.ht) < 1e-12;
  }

  // Nearest node clamped to the lattice.
  int nearest_i(double s) const {
    int i = int(std::lround((s - s0) / hs));
    return std::min(std::max(i, 0), ns - 1);
  }
  int nearest_j(double t) const {
    int j = int(std::lround((t - t0) / ht));
    return std::min(std::max(j, 0), nt - 1);
  }
};

// The square z-grid [-S, S]^2 of the plane solvers. Keeps the support
// registry so that every registered box sits well inside the box edge.
class ComplexGrid {
 public:
  ComplexGrid(double half_width, double spacing, double margin_factor = 2.0)
      : S_(half_width), h_(spacing), margin_(margin_factor) {
    require(h_ > 0.0 && S_ > 0.0, ErrorCode::InvalidArgument,
            "ComplexGrid: positive S and h required");
    double ratio = S_ / h_;
    require(std::abs(ratio - std::lround(ratio)) < 1e-9, ErrorCode::InvalidArgument,
            "ComplexGrid: S/h must be integral");
    n_side_ = 2 * int(std::lround(ratio)) + 1;
  }

  double half_width() const { return S_; }
  double spacing() const { return h_; }
  double margin_factor() const { return margin_; }
  int nodes_per_side() const { return n_side_; }

  void register_support(const Box& b) {
    Box grown = b.scaled_about_center(margin_);
    Box bounds{-S_, S_, -S_, S_};
    require(bounds.contains(grown), ErrorCode::SupportMargin,
            "ComplexGrid: support box violates the margin requirement");
    supports_.push_back(b);
  }

  const std::vector<Box>& supports() const { return supports_; }

  GridWindow full_window() const {
    return GridWindow::over(Box{-S_, S_, -S_, S_}, h_);
  }

  // Lattice-aligned window covering `b`, extended by `halo` nodes.
  GridWindow window(const Box& b, int halo = 0) const {
    auto snap_lo = [&](double x) { return std::floor(x / h_ - 1e-9) * h_; };
    auto snap_hi = [&](double x) { return std::ceil(x / h_ + 1e-9) * h_; };
    Box snapped{snap_lo(b.s0) - halo * h_, snap_hi(b.s1) + halo * h_,
                snap_lo(b.t0) - halo * h_, snap_hi(b.t1) + halo * h_};
    return GridWindow::over(snapped, h_);
  }

 private:
  double S_, h_, margin_;
  int n_side_;
  std::vector<Box> supports_;
};

}  // namespace leafray

#endif
