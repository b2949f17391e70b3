// leafray - x1-dependent symmetric tensors on the product R x M
//
// Coordinates are indexed 0 = x1, then the transversal ones (1 or 2 of
// them). Tensors keep one matrix coefficient per sorted multi-index. The
// decomposition splits off powers of dx1 and then transversal traces:
//
//   T = sum_{j,l} Sym(dx1^j (x) delta^l (x) T_{j,l}),
//
// with every T_{j,l} transversal and trace-free with respect to the
// reference Euclidean metric delta on the transversal coordinates. The
// l = 0 list is the one the pullback machinery consumes; delta-multiples
// vanish on null vectors but are kept so recomposition is exact.
#ifndef LEAFRAY_TENSOR_HPP
#define LEAFRAY_TENSOR_HPP

#include <algorithm>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>

#include "leafray/geometry.hpp"

namespace leafray {

namespace sym {

using Index = std::vector<int>;  // sorted multi-index over coordinates

inline std::vector<Index> enumerate(int dim, int degree) {
  std::vector<Index> out;
  if (degree == 0) {
    out.push_back({});
    return out;
  }
  Index cur(size_t(degree), 0);
  while (true) {
    out.push_back(cur);
    int p = degree - 1;
    while (p >= 0 && cur[size_t(p)] == dim - 1) --p;
    if (p < 0) break;
    int v = cur[size_t(p)] + 1;
    for (int q = p; q < degree; ++q) cur[size_t(q)] = v;
  }
  return out;
}

inline double orderings(const Index& idx, int dim) {
  std::vector<int> counts(static_cast<size_t>(dim), 0);
  for (int c : idx) ++counts[size_t(c)];
  double m = 1.0;
  for (int k = 2; k <= int(idx.size()); ++k) m *= k;
  for (int c = 0; c < dim; ++c)
    for (int k = 2; k <= counts[size_t(c)]; ++k) m /= k;
  return m;
}

struct Basis {
  int dim = 1, degree = 0;
  std::vector<Index> indices;
  std::vector<double> mult;  // distinct orderings per sorted index

  int position(Index idx) const {
    std::sort(idx.begin(), idx.end());
    auto it = std::lower_bound(indices.begin(), indices.end(), idx);
    require(it != indices.end() && *it == idx, ErrorCode::InvalidArgument,
            "sym::Basis: index out of range");
    return int(it - indices.begin());
  }
};

inline const Basis& basis(int dim, int degree) {
  static std::map<std::pair<int, int>, Basis> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(dim, degree);
  auto it = cache.find(key);
  if (it == cache.end()) {
    Basis b;
    b.dim = dim;
    b.degree = degree;
    b.indices = enumerate(dim, degree);
    for (const auto& idx : b.indices) b.mult.push_back(orderings(idx, dim));
    it = cache.emplace(key, std::move(b)).first;
  }
  return it->second;
}

}  // namespace sym

// Pointwise symmetric tensor value.
struct SymTensorValue {
  int dim = 1, degree = 0, rank = 1;
  std::vector<Mat> comp;  // aligned with sym::basis(dim, degree)

  static SymTensorValue zero(int dim, int degree, int rank) {
    SymTensorValue v;
    v.dim = dim;
    v.degree = degree;
    v.rank = rank;
    v.comp.assign(sym::basis(dim, degree).indices.size(), Mat(rank, rank));
    return v;
  }

  const Mat& component(sym::Index idx) const {
    return comp[size_t(sym::basis(dim, degree).position(std::move(idx)))];
  }

  // T(w (x) ... (x) w) for a complex vector over all coordinates.
  Mat contract(const std::vector<cplx>& w) const {
    const sym::Basis& b = sym::basis(dim, degree);
    Mat acc(rank, rank);
    for (size_t k = 0; k < b.indices.size(); ++k) {
      cplx factor = b.mult[k];
      for (int c : b.indices[k]) factor *= w[size_t(c)];
      if (factor == 0.0) continue;
      for (int e = 0; e < rank * rank; ++e) acc.data()[e] += factor * comp[k].data()[e];
    }
    return acc;
  }

  bool transversal() const {
    const sym::Basis& b = sym::basis(dim, degree);
    for (size_t k = 0; k < b.indices.size(); ++k) {
      bool has_x1 = !b.indices[k].empty() && b.indices[k][0] == 0;
      if (has_x1 && comp[k].norm_max() > 0.0) return false;
    }
    return true;
  }

  double norm_max() const {
    double s = 0.0;
    for (const auto& m : comp) s = std::max(s, m.norm_max());
    return s;
  }
  double dist_max(const SymTensorValue& o) const {
    double s = 0.0;
    for (size_t k = 0; k < comp.size(); ++k) s = std::max(s, (comp[k] - o.comp[k]).norm_max());
    return s;
  }

  SymTensorValue& operator+=(const SymTensorValue& o) {
    for (size_t k = 0; k < comp.size(); ++k) comp[k] += o.comp[k];
    return *this;
  }
  SymTensorValue& operator-=(const SymTensorValue& o) {
    for (size_t k = 0; k < comp.size(); ++k) comp[k] -= o.comp[k];
    return *this;
  }
};

// Sym(dx1^j (x) delta^l (x) t) for a transversal tensor t, averaged
// mechanically over slot permutations (degrees here never exceed 5).
inline SymTensorValue sym_product(int j, int l, const SymTensorValue& t) {
  const int dim = t.dim;
  const int degree = j + 2 * l + t.degree;
  SymTensorValue out = SymTensorValue::zero(dim, degree, t.rank);
  const sym::Basis& b = sym::basis(dim, degree);
  std::vector<int> pos(static_cast<size_t>(degree));
  for (size_t k = 0; k < b.indices.size(); ++k) {
    const sym::Index& J = b.indices[k];
    std::iota(pos.begin(), pos.end(), 0);
    Mat acc(t.rank, t.rank);
    double total = 0.0;
    do {
      total += 1.0;
      bool ok = true;
      for (int q = 0; q < j && ok; ++q) ok = J[size_t(pos[size_t(q)])] == 0;
      for (int p = 0; p < l && ok; ++p) {
        int c1 = J[size_t(pos[size_t(j + 2 * p)])];
        int c2 = J[size_t(pos[size_t(j + 2 * p + 1)])];
        ok = c1 != 0 && c1 == c2;
      }
      if (!ok) continue;
      sym::Index rest;
      for (int q = j + 2 * l; q < degree; ++q) rest.push_back(J[size_t(pos[size_t(q)])]);
      std::sort(rest.begin(), rest.end());
      if (!rest.empty() && rest[0] == 0) continue;  // t transversal
      acc += t.component(rest);
    } while (std::next_permutation(pos.begin(), pos.end()));
    acc *= cplx(1.0 / total, 0.0);
    out.comp[k] = acc;
  }
  return out;
}

// Trace over one transversal index pair (reference Euclidean metric).
inline SymTensorValue transversal_trace(const SymTensorValue& t) {
  SymTensorValue out = SymTensorValue::zero(t.dim, t.degree - 2, t.rank);
  const sym::Basis& b = sym::basis(t.dim, t.degree - 2);
  for (size_t k = 0; k < b.indices.size(); ++k) {
    Mat acc(t.rank, t.rank);
    for (int c = 1; c < t.dim; ++c) {
      sym::Index idx = b.indices[k];
      idx.push_back(c);
      idx.push_back(c);
      acc += t.component(idx);
    }
    out.comp[k] = acc;
  }
  return out;
}

inline double trace_defect(const SymTensorValue& t) {
  if (t.degree < 2) return 0.0;
  return transversal_trace(t).norm_max();
}

struct TensorDecomposition {
  // front[j] = T_{m-j}: trace-free transversal part paired with dx1^j
  std::vector<SymTensorValue> front;
  struct TracePart {
    int j, l;
    SymTensorValue t;
  };
  std::vector<TracePart> traces;  // l >= 1 delta-multiples
};

namespace sym {

// Transversal sub-basis positions of basis(dim, degree).
inline std::vector<size_t> transversal_positions(int dim, int degree) {
  const Basis& b = basis(dim, degree);
  std::vector<size_t> out;
  for (size_t k = 0; k < b.indices.size(); ++k) {
    bool trans = true;
    for (int c : b.indices[k])
      if (c == 0) { trans = false; break; }
    if (trans) out.push_back(k);
  }
  return out;
}

// S = tf + Sym(delta (x) r) with trace(tf) = 0; returns r, fills tf.
inline SymTensorValue split_one_trace(const SymTensorValue& s, SymTensorValue& tf) {
  const int dim = s.dim;
  auto rows = transversal_positions(dim, s.degree - 2);
  const int n = int(rows.size());
  Mat sys(n, n);
  for (int q = 0; q < n; ++q) {
    SymTensorValue eq = SymTensorValue::zero(dim, s.degree - 2, 1);
    eq.comp[rows[size_t(q)]] = Mat::identity(1);
    SymTensorValue tr = transversal_trace(sym_product(0, 1, eq));
    for (int row = 0; row < n; ++row) sys(row, q) = tr.comp[rows[size_t(row)]](0, 0);
  }
  Lu lu(sys);
  SymTensorValue tr_s = transversal_trace(s);
  SymTensorValue r = SymTensorValue::zero(dim, s.degree - 2, s.rank);
  for (int a = 0; a < s.rank; ++a)
    for (int bb = 0; bb < s.rank; ++bb) {
      Mat rhs(n, 1);
      for (int row = 0; row < n; ++row) rhs(row, 0) = tr_s.comp[rows[size_t(row)]](a, bb);
      Mat x = lu.solve(rhs);
      for (int q = 0; q < n; ++q) r.comp[rows[size_t(q)]](a, bb) = x(q, 0);
    }
  tf = s;
  tf -= sym_product(0, 1, r);
  return r;
}

}  // namespace sym

// Unique decomposition of a pointwise symmetric tensor (degree <= 5).
inline TensorDecomposition tensor_decompose(const SymTensorValue& t) {
  const int dim = t.dim, m = t.degree;
  TensorDecomposition out;
  out.front.resize(size_t(m) + 1);
  const sym::Basis& bt = sym::basis(dim, m);
  for (int j = 0; j <= m; ++j) {
    // S_j[J] = C(m, j) * T[1^j J] over transversal J
    SymTensorValue s = SymTensorValue::zero(dim, m - j, t.rank);
    double binom = 1.0;
    for (int q = 0; q < j; ++q) binom = binom * double(m - q) / double(q + 1);
    const sym::Basis& bs = sym::basis(dim, m - j);
    for (size_t k = 0; k < bs.indices.size(); ++k) {
      const sym::Index& J = bs.indices[k];
      bool trans = true;
      for (int c : J)
        if (c == 0) { trans = false; break; }
      if (!trans) continue;
      sym::Index full(size_t(j), 0);
      full.insert(full.end(), J.begin(), J.end());
      Mat v = t.comp[size_t(bt.position(std::move(full)))];
      v *= cplx(binom, 0.0);
      s.comp[k] = v;
    }
    // peel transversal traces
    int l = 0;
    SymTensorValue rem = s;
    while (true) {
      if (rem.degree <= 1) {
        if (l == 0) out.front[size_t(j)] = rem;
        else if (rem.norm_max() > 0.0) out.traces.push_back({j, l, rem});
        break;
      }
      SymTensorValue tf;
      SymTensorValue r = sym::split_one_trace(rem, tf);
      if (l == 0) out.front[size_t(j)] = tf;
      else if (tf.norm_max() > 0.0) out.traces.push_back({j, l, tf});
      rem = r;
      ++l;
    }
  }
  return out;
}

inline SymTensorValue tensor_recompose(const TensorDecomposition& d, int dim, int m,
                                       int rank) {
  SymTensorValue acc = SymTensorValue::zero(dim, m, rank);
  for (int j = 0; j <= m; ++j) acc += sym_product(j, 0, d.front[size_t(j)]);
  for (const auto& tp : d.traces) acc += sym_product(tp.j, tp.l, tp.t);
  return acc;
}

// Sampled x1-dependent symmetric tensor: values over a list of
// (x1, transversal point) samples, with the decomposition computed once
// and cached. Construction from dense per-slot data validates symmetry.
class SymmetricTensorField {
 public:
  struct Sample {
    double x1 = 0.0;
    Vec2 x{0.0, 0.0};
  };

  SymmetricTensorField(int dim, int degree, int rank, std::vector<Sample> samples)
      : dim_(dim), degree_(degree), rank_(rank), samples_(std::move(samples)) {
    values_.assign(samples_.size(), SymTensorValue::zero(dim, degree, rank));
  }

  int degree() const { return degree_; }
  size_t size() const { return samples_.size(); }
  const Sample& sample(size_t k) const { return samples_[k]; }
  SymTensorValue& value(size_t k) {
    decomposition_.clear();
    return values_[k];
  }
  const SymTensorValue& value(size_t k) const { return values_[k]; }

  // Dense constructor entry: `component` receives an arbitrary (unsorted)
  // index tuple; values must be permutation symmetric.
  void fill_dense(size_t k,
                  const std::function<Mat(const sym::Index&)>& component,
                  double sym_tol = 1e-12) {
    const sym::Basis& b = sym::basis(dim_, degree_);
    SymTensorValue v = SymTensorValue::zero(dim_, degree_, rank_);
    for (size_t q = 0; q < b.indices.size(); ++q) {
      sym::Index idx = b.indices[q];
      Mat ref = component(idx);
      // validate symmetry against one transposition per index pair
      sym::Index perm = idx;
      std::reverse(perm.begin(), perm.end());
      Mat alt = component(perm);
      require((ref - alt).norm_max() <= sym_tol * (1.0 + ref.norm_max()),
              ErrorCode::InvalidArgument,
              "SymmetricTensorField: non-symmetric input rejected");
      v.comp[q] = ref;
    }
    decomposition_.clear();
    values_[k] = std::move(v);
  }

  // Cached per-sample decomposition.
  const std::vector<TensorDecomposition>& decomposition() const {
    if (decomposition_.empty()) {
      decomposition_.reserve(values_.size());
      for (const auto& v : values_) decomposition_.push_back(tensor_decompose(v));
    }
    return decomposition_;
  }

  // Largest recomposition defect over the samples.
  double recomposition_defect() const {
    const auto& d = decomposition();
    double worst = 0.0;
    for (size_t k = 0; k < values_.size(); ++k) {
      SymTensorValue back = tensor_recompose(d[k], dim_, degree_, rank_);
      worst = std::max(worst, back.dist_max(values_[k]));
    }
    return worst;
  }

 private:
  int dim_, degree_, rank_;
  std::vector<Sample> samples_;
  std::vector<SymTensorValue> values_;
  mutable std::vector<TensorDecomposition> decomposition_;
};

// ---- callable tensor sources ------------------------------------------------

// Smooth symmetric tensor given by coefficient callables; `comp` receives
// the position in sym::basis(dim, degree).
class SymmetricTensorSource {
 public:
  int dim = 2, degree = 0, rank = 1;
  std::function<Mat(int, double, const Vec2&)> comp;
  double x1_lo = 0.0, x1_hi = 0.0;  // declared x1 support interval

  SymTensorValue at(double x1, const Vec2& x) const {
    SymTensorValue v = SymTensorValue::zero(dim, degree, rank);
    for (size_t k = 0; k < v.comp.size(); ++k) v.comp[k] = comp(int(k), x1, x);
    return v;
  }
};

// T_x(v (x) ... (x) v) for a g-unit transversal vector v.
inline Mat pullback_pi_m(const SymTensorValue& t, const SimpleSurface& surf,
                         const Vec2& x, const Vec2& v, double unit_tol = 1e-8) {
  require(std::abs(surf.metric_norm(x, v) - 1.0) <= unit_tol, ErrorCode::NonUnitVector,
          "pullback_pi_m: direction not g-unit");
  std::vector<cplx> w(static_cast<size_t>(t.dim), cplx(0.0));
  for (int c = 1; c < t.dim; ++c) w[size_t(c)] = v[size_t(c - 1)];
  return t.contract(w);
}

// Conformal transversal Christoffel symbols of the product metric; any
// x1 index gives zero. Indices are in full coordinates (0 = x1).
inline double christoffel(const SimpleSurface& surf, const Vec2& x, int up, int lo1,
                          int lo2) {
  if (up == 0 || lo1 == 0 || lo2 == 0) return 0.0;
  if (surf.kind() == SimpleSurface::Kind::Interval) return 0.0;
  Vec2 gp = surf.grad_phi(x);
  int k = up - 1, i = lo1 - 1, j = lo2 - 1;
  double v = 0.0;
  if (i == k) v += gp[size_t(j)];
  if (j == k) v += gp[size_t(i)];
  if (i == j) v -= gp[size_t(k)];
  return v;
}

// Symmetrised covariant derivative D = Sym(nabla) of a tensor source on
// (R x M, e + g); partial derivatives by fourth-order central differences.
inline SymmetricTensorSource sym_derivative(const SymmetricTensorSource& p,
                                            const SimpleSurface& surf,
                                            double fd_step = 1.5e-3) {
  SymmetricTensorSource d;
  d.dim = p.dim;
  d.degree = p.degree + 1;
  d.rank = p.rank;
  d.x1_lo = p.x1_lo;
  d.x1_hi = p.x1_hi;
  int dim = p.dim;
  auto p_copy = p;
  d.comp = [p_copy, surf, fd_step, dim](int kpos, double x1, const Vec2& x) -> Mat {
    const sym::Basis& bd = sym::basis(dim, p_copy.degree + 1);
    const sym::Basis& bp = sym::basis(dim, p_copy.degree);
    const sym::Index& J = bd.indices[size_t(kpos)];
    const int mp1 = int(J.size());
    Mat acc(p_copy.rank, p_copy.rank);
    for (int slot = 0; slot < mp1; ++slot) {
      int a = J[size_t(slot)];
      sym::Index rest;
      for (int q = 0; q < mp1; ++q)
        if (q != slot) rest.push_back(J[size_t(q)]);
      int rpos = bp.position(rest);
      // partial_a p[rest]
      auto eval = [&](double offset) -> Mat {
        double xx1 = x1;
        Vec2 xx = x;
        if (a == 0) xx1 += offset;
        else xx[size_t(a - 1)] += offset;
        return p_copy.comp(rpos, xx1, xx);
      };
      Mat der = eval(-2 * fd_step) - cplx(8.0) * eval(-fd_step) +
                cplx(8.0) * eval(fd_step) - eval(2 * fd_step);
      der *= cplx(1.0 / (12.0 * fd_step), 0.0);
      acc += der;
      // Christoffel corrections: - sum over slots of rest
      if (surf.kind() == SimpleSurface::Kind::Disk && surf.kappa() != 0.0 && a != 0) {
        for (size_t ri = 0; ri < rest.size(); ++ri) {
          int ci = rest[ri];
          if (ci == 0) continue;
          for (int bup = 1; bup < dim; ++bup) {
            double gamma = christoffel(surf, x, bup, a, ci);
            if (gamma == 0.0) continue;
            sym::Index swapped = rest;
            swapped[ri] = bup;
            Mat pv = p_copy.comp(bp.position(std::move(swapped)), x1, x);
            pv *= cplx(-gamma, 0.0);
            acc += pv;
          }
        }
      }
    }
    acc *= cplx(1.0 / mp1, 0.0);
    return acc;
  };
  return d;
}

// ---- fiber Fourier analysis ---------------------------------------------------

struct FourierDegree {
  int degree = 0;
  bool infinite = false;           // energy persists at the truncation limit
  std::vector<double> mode_norms;  // |c_k| for k = 0 .. nmax
};

// Degree of a function on the circle fiber from uniform angle samples.
// Truncation limit is n/2 - 1 (Nyquist); energy above tol there yields the
// infinite marker.
inline FourierDegree fourier_degree(const std::vector<Mat>& samples, double tol) {
  const int n = int(samples.size());
  require(n >= 8, ErrorCode::NyquistResolution,
          "fourier_degree: need at least 8 angle samples");
  const int r = samples[0].rows();
  const int kmax = n / 2 - 1;
  FourierDegree out;
  out.mode_norms.assign(size_t(kmax) + 1, 0.0);
  for (int k = 0; k <= kmax; ++k) {
    Mat cp(r, r), cm(r, r);
    for (int q = 0; q < n; ++q) {
      double th = 2.0 * kPi * q / n;
      cplx ep(std::cos(k * th), -std::sin(k * th));
      for (int e = 0; e < r * r; ++e) {
        cp.data()[e] += ep * samples[size_t(q)].data()[e];
        cm.data()[e] += std::conj(ep) * samples[size_t(q)].data()[e];
      }
    }
    cp *= cplx(1.0 / n, 0.0);
    cm *= cplx(1.0 / n, 0.0);
    out.mode_norms[size_t(k)] = std::max(cp.norm_fro(), cm.norm_fro());
  }
  for (int k = kmax; k >= 0; --k)
    if (out.mode_norms[size_t(k)] > tol) {
      out.degree = k;
      out.infinite = (k == kmax);
      break;
    }
  return out;
}

}  // namespace leafray

#endif
