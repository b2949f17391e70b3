// leafray - small dense complex matrices and factorizations
//
// Everything here targets tiny sizes (fiber rank r <= 4, moment systems,
// least-squares bases), plus one general LU used by the dense solver
// fallback. Column count is dynamic; storage is row-major.
#ifndef LEAFRAY_SMALLMAT_HPP
#define LEAFRAY_SMALLMAT_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "leafray/core.hpp"

namespace leafray {

class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols) : rows_(rows), cols_(cols), a_(size_t(rows) * cols) {}
  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Mat zero(int n) { return Mat(n, n); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  cplx& operator()(int i, int j) { return a_[size_t(i) * cols_ + j]; }
  cplx operator()(int i, int j) const { return a_[size_t(i) * cols_ + j]; }
  cplx* data() { return a_.data(); }
  const cplx* data() const { return a_.data(); }

  Mat& operator+=(const Mat& o) {
    for (size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
    return *this;
  }
  Mat& operator-=(const Mat& o) {
    for (size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
    return *this;
  }
  Mat& operator*=(cplx s) {
    for (auto& v : a_) v *= s;
    return *this;
  }

  friend Mat operator+(Mat a, const Mat& b) { return a += b; }
  friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
  friend Mat operator*(Mat a, cplx s) { return a *= s; }
  friend Mat operator*(cplx s, Mat a) { return a *= s; }

  friend Mat operator*(const Mat& a, const Mat& b) {
    Mat c(a.rows_, b.cols_);
    for (int i = 0; i < a.rows_; ++i)
      for (int k = 0; k < a.cols_; ++k) {
        cplx aik = a(i, k);
        if (aik == 0.0) continue;
        for (int j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  Mat adjoint() const {
    Mat c(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) c(j, i) = std::conj((*this)(i, j));
    return c;
  }
  Mat transpose() const {
    Mat c(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) c(j, i) = (*this)(i, j);
    return c;
  }
  Mat conjugate() const {
    Mat c(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) c(i, j) = std::conj((*this)(i, j));
    return c;
  }

  double norm_fro() const {
    double s = 0.0;
    for (const auto& v : a_) s += std::norm(v);
    return std::sqrt(s);
  }
  double norm_max() const {
    double s = 0.0;
    for (const auto& v : a_) s = std::max(s, std::abs(v));
    return s;
  }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<cplx> a_;
};

// LU with partial pivoting; factors stored in place.
class Lu {
 public:
  explicit Lu(Mat a) : a_(std::move(a)), piv_(a_.rows()) {
    int n = a_.rows();
    require(a_.cols() == n, ErrorCode::InvalidArgument, "Lu: square matrix required");
    for (int i = 0; i < n; ++i) piv_[i] = i;
    for (int k = 0; k < n; ++k) {
      int p = k;
      double best = std::abs(a_(k, k));
      for (int i = k + 1; i < n; ++i) {
        double m = std::abs(a_(i, k));
        if (m > best) { best = m; p = i; }
      }
      if (p != k) {
        for (int j = 0; j < n; ++j) std::swap(a_(k, j), a_(p, j));
        std::swap(piv_[k], piv_[p]);
        sign_ = -sign_;
      }
      if (best == 0.0) { singular_ = true; continue; }
      cplx inv = 1.0 / a_(k, k);
      for (int i = k + 1; i < n; ++i) {
        cplx lik = a_(i, k) * inv;
        a_(i, k) = lik;
        if (lik == 0.0) continue;
        for (int j = k + 1; j < n; ++j) a_(i, j) -= lik * a_(k, j);
      }
    }
  }

  bool singular() const { return singular_; }

  cplx det() const {
    cplx d = sign_;
    for (int i = 0; i < a_.rows(); ++i) d *= a_(i, i);
    return d;
  }

  // Solves A x = b for a stack of right-hand sides (columns of b).
  Mat solve(const Mat& b) const {
    require(!singular_, ErrorCode::SingularGauge, "Lu::solve: singular matrix");
    int n = a_.rows(), m = b.cols();
    Mat x(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) x(i, j) = b(piv_[i], j);
    for (int k = 0; k < n; ++k)
      for (int i = k + 1; i < n; ++i) {
        cplx lik = a_(i, k);
        if (lik == 0.0) continue;
        for (int j = 0; j < m; ++j) x(i, j) -= lik * x(k, j);
      }
    for (int k = n - 1; k >= 0; --k) {
      cplx inv = 1.0 / a_(k, k);
      for (int j = 0; j < m; ++j) {
        cplx s = x(k, j);
        for (int i = k + 1; i < n; ++i) s -= a_(k, i) * x(i, j);
        x(k, j) = s * inv;
      }
    }
    return x;
  }

 private:
  Mat a_;
  std::vector<int> piv_;
  double sign_ = 1.0;
  bool singular_ = false;
};

inline cplx det(const Mat& a) {
  if (a.rows() == 1) return a(0, 0);
  if (a.rows() == 2) return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  return Lu(a).det();
}

inline Mat inverse(const Mat& a) {
  int n = a.rows();
  if (n == 1) {
    require(a(0, 0) != 0.0, ErrorCode::SingularGauge, "inverse: zero scalar");
    Mat r(1, 1);
    r(0, 0) = 1.0 / a(0, 0);
    return r;
  }
  if (n == 2) {
    cplx d = det(a);
    require(d != 0.0, ErrorCode::SingularGauge, "inverse: singular 2x2");
    Mat r(2, 2);
    cplx inv = 1.0 / d;
    r(0, 0) = a(1, 1) * inv;
    r(0, 1) = -a(0, 1) * inv;
    r(1, 0) = -a(1, 0) * inv;
    r(1, 1) = a(0, 0) * inv;
    return r;
  }
  return Lu(a).solve(Mat::identity(n));
}

// Scaling-and-squaring matrix exponential with a Taylor core. Inputs here
// are O(1) bump values, so a fixed 18-term core after scaling is ample.
inline Mat mat_exp(const Mat& a) {
  int n = a.rows();
  double scale = a.norm_fro();
  int squarings = 0;
  Mat b = a;
  while (scale > 0.25) {
    scale *= 0.5;
    ++squarings;
  }
  if (squarings > 0) b *= cplx(std::ldexp(1.0, -squarings), 0.0);
  Mat term = Mat::identity(n);
  Mat sum = term;
  for (int k = 1; k <= 18; ++k) {
    term = term * b;
    term *= cplx(1.0 / k, 0.0);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

struct Eigen2 {
  cplx lambda1, lambda2;
  Mat vectors;  // columns
  bool ok = false;
};

inline Eigen2 eigen_2x2(const Mat& a) {
  Eigen2 e;
  cplx tr = a(0, 0) + a(1, 1);
  cplx disc = std::sqrt(tr * tr - 4.0 * det(a));
  e.lambda1 = 0.5 * (tr + disc);
  e.lambda2 = 0.5 * (tr - disc);
  e.vectors = Mat(2, 2);
  auto fill = [&](cplx lam, int col) -> bool {
    // (a - lam) v = 0; pick the larger row to avoid cancellation
    cplx r0x = a(0, 0) - lam, r0y = a(0, 1);
    cplx r1x = a(1, 0), r1y = a(1, 1) - lam;
    cplx vx, vy;
    if (std::abs(r0x) + std::abs(r0y) >= std::abs(r1x) + std::abs(r1y)) {
      vx = -r0y; vy = r0x;
    } else {
      vx = -r1y; vy = r1x;
    }
    double nrm = std::sqrt(std::norm(vx) + std::norm(vy));
    if (nrm == 0.0) { vx = (col == 0) ? 1.0 : 0.0; vy = (col == 0) ? 0.0 : 1.0; nrm = 1.0; }
    e.vectors(0, col) = vx / nrm;
    e.vectors(1, col) = vy / nrm;
    return true;
  };
  fill(e.lambda1, 0);
  fill(e.lambda2, 1);
  e.ok = std::abs(det(e.vectors)) > 1e-8;
  return e;
}

// Principal matrix logarithm for ranks 1 and 2 via eigendecomposition.
// Throws ErrorCode::LogBranch if an eigenvalue sits on the closed negative
// real axis or the matrix is too close to defective.
inline Mat mat_log(const Mat& a) {
  int n = a.rows();
  auto branch_ok = [](cplx lam) {
    return !(lam.real() <= 0.0 && std::abs(lam.imag()) < 1e-14 * (1.0 + std::abs(lam.real())));
  };
  if (n == 1) {
    require(a(0, 0) != 0.0 && branch_ok(a(0, 0)), ErrorCode::LogBranch,
            "mat_log: eigenvalue on branch cut");
    Mat r(1, 1);
    r(0, 0) = std::log(a(0, 0));
    return r;
  }
  require(n == 2, ErrorCode::InvalidArgument, "mat_log: rank > 2 not supported");
  Eigen2 e = eigen_2x2(a);
  require(branch_ok(e.lambda1) && branch_ok(e.lambda2), ErrorCode::LogBranch,
          "mat_log: eigenvalue on branch cut");
  if (std::abs(e.lambda1 - e.lambda2) < 1e-9 * (std::abs(e.lambda1) + 1.0)) {
    // Nearly scalar: log(lam) I + (A - lam I)/lam is exact for the Jordan block.
    cplx lam = 0.5 * (e.lambda1 + e.lambda2);
    Mat r = a;
    r -= lam * Mat::identity(2);
    r *= 1.0 / lam;
    r += std::log(lam) * Mat::identity(2);
    return r;
  }
  require(e.ok, ErrorCode::LogBranch, "mat_log: defective eigenbasis");
  Mat d(2, 2);
  d(0, 0) = std::log(e.lambda1);
  d(1, 1) = std::log(e.lambda2);
  return e.vectors * d * inverse(e.vectors);
}

// Least squares via normal equations with a small diagonal shift; adequate
// for the well-conditioned bump bases used by the probes.
inline std::vector<cplx> least_squares(const Mat& a, const std::vector<cplx>& b,
                                       double ridge = 0.0) {
  int m = a.rows(), n = a.cols();
  Mat ata(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      cplx s = 0.0;
      for (int k = 0; k < m; ++k) s += std::conj(a(k, i)) * a(k, j);
      ata(i, j) = s;
    }
  for (int i = 0; i < n; ++i) ata(i, i) += ridge;
  Mat atb(n, 1);
  for (int i = 0; i < n; ++i) {
    cplx s = 0.0;
    for (int k = 0; k < m; ++k) s += std::conj(a(k, i)) * b[size_t(k)];
    atb(i, 0) = s;
  }
  Mat x = Lu(ata).solve(atb);
  std::vector<cplx> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[size_t(i)] = x(i, 0);
  return out;
}

}  // namespace leafray

#endif
